//! Prior families on coefficient vectors.
//!
//! * Random series: `f = Σ_{i<=M} f_i φ_i` with `M ~ Poisson(μ)` (capped at
//!   `M_max`) and independent `f_i` with density `p(·/κ_i)/κ_i`.
//! * Gaussian: independent `f_i ~ N(0, τ² b_i^{-2α})`, trace class for `α > d/2`.
//! * Scale mixture: the Gaussian prior with `τ` drawn from a mixing law `Q`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::operators::ForwardOperator;
use crate::rates::{linear_fit, LinearFit};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::scales::{CoefficientVector, SequenceScale};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Base density `p` of the series coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientDensity {
    /// Standard normal.
    Gaussian,
    /// `p(x) = e^{-|x|}/2`.
    Laplace,
}

impl CoefficientDensity {
    pub fn ln_pdf(self, x: f64) -> f64 {
        match self {
            Self::Gaussian => -0.5 * x * x - LN_SQRT_2PI,
            Self::Laplace => -x.abs() - std::f64::consts::LN_2,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => StandardNormal.sample(rng),
            Self::Laplace => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
        }
    }

    /// Tail exponent `w` in `p(x) >= e^{-C|x|^w}`.
    pub fn tail_exponent(self) -> f64 {
        match self {
            Self::Gaussian => 2.0,
            Self::Laplace => 1.0,
        }
    }
}

/// Scaling sequence `κ_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kappa<T> {
    Unit,
    /// `κ_i = i^{-exponent}`.
    Power {
        exponent: T,
    },
    Explicit(Arc<[T]>),
}

impl<T: Scalar> Kappa<T> {
    pub fn at(&self, i: usize) -> T {
        match self {
            Self::Unit => T::one(),
            Self::Power { exponent } => T::of_usize(i).powf(-*exponent),
            Self::Explicit(k) => k[i - 1],
        }
    }
}

/// Random series prior.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPrior<T> {
    pub mu: T,
    pub density: CoefficientDensity,
    pub kappa: Kappa<T>,
    pub m_max: usize,
}

impl<T: Scalar> Default for SeriesPrior<T> {
    fn default() -> Self {
        Self {
            mu: T::of(5.0),
            density: CoefficientDensity::Gaussian,
            kappa: Kappa::Unit,
            m_max: 200,
        }
    }
}

impl<T: Scalar> SeriesPrior<T> {
    pub fn new(mu: T, density: CoefficientDensity, kappa: Kappa<T>, m_max: usize) -> Result<Self> {
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Poisson mean must be positive, got {mu}"
            )));
        }
        if let Kappa::Explicit(k) = &kappa {
            if k.len() < m_max || k.iter().any(|x| !(*x > T::zero())) {
                return Err(Error::InvalidArgument(
                    "explicit kappa must be positive and cover 1..=M_max".into(),
                ));
            }
        }
        Ok(Self {
            mu,
            density,
            kappa,
            m_max,
        })
    }

    /// `log p_M(m)` for the Poisson law truncated to `0..=M_max`.
    pub fn log_pm(&self, m: usize) -> f64 {
        if m > self.m_max {
            return f64::NEG_INFINITY;
        }
        let mu = self.mu.as_f64();
        let kept = gamma_ur(self.m_max as f64 + 1.0, mu);
        -mu + m as f64 * mu.ln() - ln_gamma(m as f64 + 1.0) - kept.ln()
    }

    /// `log p(x/κ_i) - log κ_i`.
    pub fn log_coefficient_density(&self, i: usize, x: T) -> f64 {
        let k = self.kappa.at(i).as_f64();
        self.density.ln_pdf(x.as_f64() / k) - k.ln()
    }

    pub fn sample_dimension<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.m_max == 0 {
            return 0;
        }
        let pois = Poisson::new(self.mu.as_f64()).expect("validated mean");
        loop {
            let m = pois.sample(rng) as usize;
            if m <= self.m_max {
                return m;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, CoefficientVector<T>) {
        let m = self.sample_dimension(rng);
        let coeffs = (1..=m)
            .map(|i| self.kappa.at(i) * T::of(self.density.sample(rng)))
            .collect();
        (m, CoefficientVector::from_vec_unchecked(coeffs))
    }

    /// `log p_M(M) + Σ_{i<=M} [log p(f_i/κ_i) − log κ_i]`.
    pub fn log_density(&self, f: &CoefficientVector<T>, m: usize) -> Result<f64> {
        if m > self.m_max {
            return Err(Error::SupportViolation(format!(
                "M = {m} exceeds M_max = {}",
                self.m_max
            )));
        }
        if f.support_len() > m {
            return Err(Error::SupportViolation(format!(
                "coefficient {} is nonzero but M = {m}",
                f.support_len()
            )));
        }
        Ok((1..=m).fold(self.log_pm(m), |acc, i| {
            acc + self.log_coefficient_density(i, f.coord(i))
        }))
    }

    /// Constants `b1 >= b2 > 0` with `e^{-b1 k} <= p_M(k) <= e^{-b2 k}` for
    /// `1 <= k <= k_max`, read off the log-mass slope.
    pub fn dimension_tail_constants(&self, k_max: usize) -> (f64, f64) {
        let slopes: Vec<f64> = (1..=k_max.min(self.m_max).max(1))
            .map(|k| -self.log_pm(k) / k as f64)
            .collect();
        let b1 = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let b2 = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        (b1, b2)
    }

    /// Checks `C⁻¹ i^{-β₀/d} (log i)^{-1/w} <= κ_i <= C i^{α}` for `2 <= i <= i_max`.
    pub fn kappa_within_bounds(&self, beta0: f64, alpha: f64, d: f64, i_max: usize, constant: f64) -> bool {
        let w = self.density.tail_exponent();
        let limit = match &self.kappa {
            Kappa::Explicit(k) => i_max.min(k.len()),
            _ => i_max,
        };
        (2..=limit).all(|i| {
            let x = i as f64;
            let k = self.kappa.at(i).as_f64();
            let lower = x.powf(-beta0 / d) * x.ln().powf(-1.0 / w) / constant;
            let upper = constant * x.powf(alpha);
            k >= lower && k <= upper
        })
    }
}

/// Centered Gaussian prior with `sd_i = τ b_i^{-α}` on the first `truncation` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior<T> {
    alpha: T,
    tau: T,
    truncation: usize,
    scale: SequenceScale<T>,
}

impl<T: Scalar> GaussianPrior<T> {
    /// Requires `α > d/2` (trace-class covariance) and `τ >= 0`; `τ = 0` is
    /// the point mass at zero.
    pub fn new(alpha: T, tau: T, truncation: usize, scale: SequenceScale<T>) -> Result<Self> {
        if !(alpha > scale.dim() / T::of(2.0)) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian prior needs alpha > d/2 for a trace-class covariance (alpha = {alpha}, d = {})",
                scale.dim()
            )));
        }
        if !(tau >= T::zero()) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be nonnegative, got {tau}")));
        }
        Ok(Self {
            alpha,
            tau,
            truncation,
            scale,
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn scale(&self) -> &SequenceScale<T> {
        &self.scale
    }

    pub fn with_tau(&self, tau: T) -> Result<Self> {
        Self::new(self.alpha, tau, self.truncation, self.scale.clone())
    }

    /// Prior standard deviation of coordinate `i` (1-based).
    pub fn sd(&self, i: usize) -> T {
        self.tau * self.scale.b(i).powf(-self.alpha)
    }

    pub fn sds(&self) -> Vec<T> {
        (1..=self.truncation).map(|i| self.sd(i)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CoefficientVector<T> {
        let c = (1..=self.truncation)
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                self.sd(i) * T::of(z)
            })
            .collect();
        CoefficientVector::from_vec_unchecked(c)
    }
}

/// Mixing law `Q` of the scale `τ`.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingLaw<T> {
    /// `1/τ² ~ Gamma(shape, rate)`.
    InvGammaSq {
        shape: T,
        rate: T,
    },
    PointMass(T),
    /// Finite support with probabilities.
    Discrete {
        taus: Vec<T>,
        weights: Vec<T>,
    },
}

impl<T: Scalar> MixingLaw<T> {
    pub fn inv_gamma_sq(shape: T, rate: T) -> Result<Self> {
        if !(shape > T::zero()) || !(rate > T::zero()) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "inverse-square-gamma law needs positive finite shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(Self::InvGammaSq { shape, rate })
    }

    pub fn discrete(taus: Vec<T>, weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if taus.is_empty()
            || taus.len() != weights.len()
            || taus.iter().any(|t| !(*t > T::zero()))
            || weights.iter().any(|w| *w < T::zero())
            || !(total > T::zero())
        {
            return Err(Error::InvalidArgument(
                "discrete law needs matching positive taus and weights".into(),
            ));
        }
        Ok(Self::Discrete {
            taus,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Self::InvGammaSq { .. })
    }

    /// Log density of `τ` (continuous laws only).
    pub fn ln_density(&self, tau: f64) -> Option<f64> {
        match self {
            Self::InvGammaSq { shape, rate } => {
                let (a, b) = (shape.as_f64(), rate.as_f64());
                if tau <= 0.0 {
                    return Some(f64::NEG_INFINITY);
                }
                let u = tau.powi(-2);
                Some(a * b.ln() - ln_gamma(a) + (a - 1.0) * u.ln() - b * u + std::f64::consts::LN_2 - 3.0 * tau.ln())
            }
            _ => None,
        }
    }

    pub fn median(&self) -> T {
        match self {
            Self::InvGammaSq { shape, rate } => {
                let g = GammaDist::new(shape.as_f64(), rate.as_f64()).expect("validated");
                T::of(g.inverse_cdf(0.5).powf(-0.5))
            }
            Self::PointMass(t) => *t,
            Self::Discrete { taus, weights } => {
                let mut idx: Vec<usize> = (0..taus.len()).collect();
                idx.sort_by(|&a, &b| taus[a].partial_cmp(&taus[b]).expect("finite"));
                let mut acc = T::zero();
                for i in idx {
                    acc += weights[i];
                    if acc >= T::of(0.5) {
                        return taus[i];
                    }
                }
                taus[taus.len() - 1]
            }
        }
    }

    /// 80 log-spaced points spanning `[τ̂/100, 100 τ̂]` around the median `τ̂`.
    pub fn default_grid(&self) -> Vec<T> {
        log_grid(self.median().as_f64() / 100.0, self.median().as_f64() * 100.0, 80)
            .into_iter()
            .map(T::of)
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            Self::InvGammaSq { shape, rate } => {
                let g = Gamma::new(shape.as_f64(), 1.0 / rate.as_f64()).expect("validated");
                let u: f64 = g.sample(rng);
                T::of(u.powf(-0.5))
            }
            Self::PointMass(t) => *t,
            Self::Discrete { taus, weights } => {
                let u = T::of(rng.random::<f64>());
                let mut acc = T::zero();
                for (t, w) in taus.iter().zip(weights) {
                    acc += *w;
                    if u < acc {
                        return *t;
                    }
                }
                taus[taus.len() - 1]
            }
        }
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Gaussian scale mixture: `f | τ ~ N(0, τ² b_i^{-2α})`, `τ ~ Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePrior<T> {
    base: GaussianPrior<T>,
    law: MixingLaw<T>,
}

impl<T: Scalar> MixturePrior<T> {
    pub fn new(alpha: T, law: MixingLaw<T>, truncation: usize, scale: SequenceScale<T>) -> Result<Self> {
        Ok(Self {
            base: GaussianPrior::new(alpha, T::one(), truncation, scale)?,
            law,
        })
    }

    pub fn alpha(&self) -> T {
        self.base.alpha()
    }

    pub fn law(&self) -> &MixingLaw<T> {
        &self.law
    }

    pub fn truncation(&self) -> usize {
        self.base.truncation()
    }

    pub fn scale(&self) -> &SequenceScale<T> {
        self.base.scale()
    }

    /// The Gaussian component with scale `τ`.
    pub fn component(&self, tau: T) -> Result<GaussianPrior<T>> {
        self.base.with_tau(tau)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (T, CoefficientVector<T>) {
        let tau = self.law.sample(rng);
        let f = self.base.sample(rng).scaled(tau);
        (tau, f)
    }
}

/// Any of the three prior families.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec<T> {
    Series(SeriesPrior<T>),
    Gaussian(GaussianPrior<T>),
    Mixture(MixturePrior<T>),
}

/// One prior draw, with the latent dimension or scale when the family has one.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDraw<T> {
    pub coeffs: CoefficientVector<T>,
    pub m: Option<usize>,
    pub tau: Option<T>,
}

impl<T: Scalar> PriorSpec<T> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PriorDraw<T> {
        match self {
            Self::Series(p) => {
                let (m, coeffs) = p.sample(rng);
                PriorDraw {
                    coeffs,
                    m: Some(m),
                    tau: None,
                }
            }
            Self::Gaussian(p) => PriorDraw {
                coeffs: p.sample(rng),
                m: None,
                tau: None,
            },
            Self::Mixture(p) => {
                let (tau, coeffs) = p.sample(rng);
                PriorDraw {
                    coeffs,
                    m: None,
                    tau: Some(tau),
                }
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Series(_) => "series",
            Self::Gaussian(_) => "gaussian",
            Self::Mixture(_) => "mixture",
        }
    }
}

/// Monte-Carlo estimate of `Π(‖Af − Af₀‖ < ε)` at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMassPoint {
    pub eps: f64,
    pub hits: u64,
    pub draws: u64,
    /// `−log P̂`, absent when no draw landed inside the ball.
    pub neg_log_p: Option<f64>,
    /// Delta-method standard error of `−log P̂`.
    pub stderr: Option<f64>,
    /// At least [`MIN_RELIABLE_HITS`] hits.
    pub reliable: bool,
}

pub const MIN_RELIABLE_HITS: u64 = 50;

const DRAW_BLOCK: usize = 4096;

/// Distances `‖Af − Af₀‖` for `n_draws` prior draws, reproducible for a
/// given seed regardless of thread count.
pub fn image_distances<T: Scalar>(
    prior: &PriorSpec<T>,
    op: &ForwardOperator<T>,
    f0: &CoefficientVector<T>,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let af0 = op.apply(f0)?;
    let blocks = n_draws.div_ceil(DRAW_BLOCK);
    let per_block: Result<Vec<Vec<f64>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, &[b as u64]);
            let count = DRAW_BLOCK.min(n_draws - b * DRAW_BLOCK);
            (0..count)
                .map(|_| {
                    let f = prior.sample(&mut rng).coeffs;
                    Ok(op.apply(&f)?.sub(&af0).l2().as_f64())
                })
                .collect()
        })
        .collect();
    Ok(per_block?.into_iter().flatten().collect())
}

/// `(ε, −log Π̂(‖Af − Af₀‖ < ε))` over a list of radii. Points with fewer than
/// [`MIN_RELIABLE_HITS`] hits are flagged unreliable.
pub fn prior_mass_curve<T: Scalar>(
    prior: &PriorSpec<T>,
    op: &ForwardOperator<T>,
    f0: &CoefficientVector<T>,
    epsilons: &[f64],
    n_draws: usize,
    seed: u64,
) -> Result<Vec<PriorMassPoint>> {
    if n_draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let dist = image_distances(prior, op, f0, n_draws, seed)?;
    Ok(mass_points(&dist, epsilons))
}

pub(crate) fn mass_points(dist: &[f64], epsilons: &[f64]) -> Vec<PriorMassPoint> {
    let n = dist.len() as u64;
    epsilons
        .iter()
        .map(|&eps| {
            let hits = dist.iter().filter(|&&d| d < eps).count() as u64;
            let p = hits as f64 / n as f64;
            let (neg_log_p, stderr) = if hits == 0 {
                (None, None)
            } else {
                (Some(-p.ln()), Some(((1.0 - p) / (n as f64 * p)).sqrt()))
            };
            PriorMassPoint {
                eps,
                hits,
                draws: n,
                neg_log_p,
                stderr,
                reliable: hits >= MIN_RELIABLE_HITS,
            }
        })
        .collect()
}

/// Least-squares line of `−log P̂` against `ε^{-exponent}` over reliable points.
pub fn small_ball_fit(points: &[PriorMassPoint], exponent: f64) -> Result<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.reliable)
        .filter_map(|p| p.neg_log_p.map(|y| (p.eps.powf(-exponent), y)))
        .unzip();
    linear_fit(&xs, &ys)
}

/// Outcome of the tail check on a mixing law.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConditionReport {
    /// Law has support `[0, ∞)`.
    pub full_support: bool,
    /// `max_t −log Q((t,2t)) · t²` over the small-`t` grid.
    pub small_t_ratio: f64,
    /// `max_t −log Q((t,2t)) · t^{-d/(α−d/2)}` over the large-`t` grid.
    pub large_t_ratio: f64,
    pub satisfied: bool,
}

/// `log ∫_lo^hi exp(ln_density)` by composite Simpson in `log τ`.
fn ln_integral(ln_density: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / panels as f64;
    let terms: Vec<f64> = (0..=panels)
        .map(|k| {
            let x = a + h * k as f64;
            let w: f64 = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            ln_density(x.exp()) + x + w.ln()
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln() + (h / 3.0).ln()
}

/// Evaluates `−log Q((t,2t))` on both grids by numerical integration of the
/// density of `τ` and reports the growth ratios.
pub fn check_mixture_condition<T: Scalar>(
    law: &MixingLaw<T>,
    alpha: f64,
    d: f64,
    small_grid: &[f64],
    large_grid: &[f64],
) -> Result<MixtureConditionReport> {
    if !(alpha > d / 2.0) {
        return Err(Error::InvalidArgument("mixture condition needs alpha > d/2".into()));
    }
    if !law.is_continuous() {
        return Ok(MixtureConditionReport {
            full_support: false,
            small_t_ratio: f64::INFINITY,
            large_t_ratio: f64::INFINITY,
            satisfied: false,
        });
    }
    let dens = |t: f64| law.ln_density(t).expect("continuous law");
    let total = ln_integral(dens, 1e-8, 1e8, 20_000).exp();
    if !((total - 1.0).abs() < 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "mixing density does not integrate to one (got {total})"
        )));
    }
    let neg_log_q = |t: f64| -ln_integral(dens, t, 2.0 * t, 400);
    let large_power = d / (alpha - d / 2.0);
    let small = small_grid
        .iter()
        .map(|&t| neg_log_q(t) * t * t)
        .fold(f64::NEG_INFINITY, f64::max);
    let large = large_grid
        .iter()
        .map(|&t| neg_log_q(t) * t.powf(-large_power))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MixtureConditionReport {
        full_support: true,
        small_t_ratio: small,
        large_t_ratio: large,
        satisfied: small.is_finite() && large.is_finite(),
    })
}
