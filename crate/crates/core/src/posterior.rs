//! Posterior engines.
//!
//! * Conjugate: Gaussian prior and diagonal operator give independent
//!   Gaussian coordinates.
//! * Grid mixture: the scale `τ` of a Gaussian mixture prior is integrated
//!   numerically over a grid.
//! * Series MCMC: the random series prior is sampled by a trans-dimensional
//!   chain with birth/death moves on `M`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::model::Observation;
use crate::operators::{dense_sparse_dot, gram_from_images, images, ForwardOperator};
use crate::priors::{CoefficientDensity, GaussianPrior, MixingLaw, MixturePrior, SeriesPrior};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::scales::CoefficientVector;
use crate::stats::{batch_means_stderr, effective_sample_size, sorted_quantile, split_rhat};

/// Draws used to estimate radii of exact and grid posteriors.
pub const RADIUS_DRAWS: usize = 10_000;

/// Posterior mass allowed at either end of a `τ` grid.
pub const ENDPOINT_MASS_LIMIT: f64 = 0.01;

/// Within-model acceptance rate below which a sampler is declared misconfigured.
pub const MIN_ACCEPTANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorKind {
    Exact,
    GridMixture,
    Samples,
}

/// Independent-coordinate Gaussian `N(means, diag(variances))` with a mixture weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<T> {
    pub weight: T,
    pub means: Vec<T>,
    pub variances: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McmcDiagnostics {
    pub chains: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    /// Random-walk acceptance (Laplace coefficients only).
    pub within_acceptance: Option<f64>,
    pub birth_acceptance: f64,
    pub death_acceptance: f64,
    /// `M` after every iteration, per chain.
    pub m_trace: Vec<Vec<usize>>,
    pub m_ess: f64,
    pub m_rhat: f64,
    /// Batch-means standard error of each posterior mean coordinate.
    pub mean_stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult<T> {
    pub kind: PosteriorKind,
    pub means: Vec<T>,
    pub variances: Vec<T>,
    /// Gaussian components (one for the conjugate engine, one per grid point
    /// for the mixture engine, none for samples).
    pub components: Vec<GaussianComponent<T>>,
    /// Post-burn-in draws of the samples kind.
    pub samples: Vec<CoefficientVector<T>>,
    pub tau_weights: Option<Vec<(T, T)>>,
    pub diagnostics: Option<McmcDiagnostics>,
}

impl<T: Scalar> PosteriorResult<T> {
    pub fn mean_vector(&self) -> CoefficientVector<T> {
        CoefficientVector::from_vec_unchecked(self.means.clone())
    }

    fn from_components(kind: PosteriorKind, components: Vec<GaussianComponent<T>>) -> Self {
        let len = components.iter().map(|c| c.means.len()).max().unwrap_or(0);
        let mut means = vec![T::zero(); len];
        let mut second = vec![T::zero(); len];
        for c in &components {
            for i in 0..c.means.len() {
                means[i] += c.weight * c.means[i];
                second[i] += c.weight * (c.variances[i] + c.means[i] * c.means[i]);
            }
        }
        let variances = means
            .iter()
            .zip(&second)
            .map(|(&m, &s)| (s - m * m).max(T::zero()))
            .collect();
        Self {
            kind,
            means,
            variances,
            components,
            samples: Vec::new(),
            tau_weights: None,
            diagnostics: None,
        }
    }
}

fn diagonal_entries<T: Scalar>(op: &ForwardOperator<T>, len: usize) -> Result<Vec<T>> {
    if !op.is_diagonal() {
        return Err(Error::Unsupported(format!(
            "closed-form posteriors need a diagonal operator, got `{}`; use the MCMC engine",
            op.label()
        )));
    }
    (1..=len)
        .map(|i| {
            op.singular_value(i).ok_or(Error::DimensionMismatch {
                expected: op.domain_dim(),
                got: len,
            })
        })
        .collect()
}

fn check_truncation<T: Scalar>(obs: &Observation<T>, truncation: usize) -> Result<()> {
    if truncation > obs.j_obs() {
        return Err(Error::TruncationLoss {
            needed: truncation,
            observed: obs.j_obs(),
        });
    }
    Ok(())
}

/// Per-coordinate posterior for prior standard deviations `sds`.
fn conjugate_component<T: Scalar>(obs: &Observation<T>, a: &[T], sds: &[T]) -> GaussianComponent<T> {
    let n = obs.n();
    let (means, variances) = a
        .iter()
        .zip(sds)
        .enumerate()
        .map(|(i, (&ai, &sd))| {
            if sd == T::zero() {
                return (T::zero(), T::zero());
            }
            let v = (n * ai * ai + (sd * sd).recip()).recip();
            (v * n * ai * obs.y().coord(i + 1), v)
        })
        .unzip();
    GaussianComponent {
        weight: T::one(),
        means,
        variances,
    }
}

/// Exact posterior for a Gaussian prior and a diagonal operator.
pub fn conjugate_posterior<T: Scalar>(
    obs: &Observation<T>,
    op: &ForwardOperator<T>,
    prior: &GaussianPrior<T>,
) -> Result<PosteriorResult<T>> {
    check_truncation(obs, prior.truncation())?;
    let a = diagonal_entries(op, prior.truncation())?;
    let comp = conjugate_component(obs, &a, &prior.sds());
    Ok(PosteriorResult::from_components(PosteriorKind::Exact, vec![comp]))
}

/// `log m(y | τ)` over the prior coordinates, up to a `τ`-free constant.
fn log_marginal<T: Scalar>(y: &CoefficientVector<T>, n: f64, a: &[T], base_sds: &[T], tau: f64) -> f64 {
    a.iter()
        .zip(base_sds)
        .enumerate()
        .map(|(i, (&ai, &sd))| {
            let s = ai.as_f64() * tau * sd.as_f64();
            let var = s * s + 1.0 / n;
            let yi = y.coord(i + 1).as_f64();
            -0.5 * (2.0 * std::f64::consts::PI * var).ln() - yi * yi / (2.0 * var)
        })
        .sum()
}

/// Trapezoid cell widths of a sorted grid.
fn cell_widths(grid: &[f64]) -> Vec<f64> {
    let k = grid.len();
    if k == 1 {
        return vec![1.0];
    }
    (0..k)
        .map(|i| {
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(k - 1)];
            (hi - lo) / 2.0
        })
        .collect()
}

/// Grid of `τ` values and their log prior weights.
fn prior_grid<T: Scalar>(law: &MixingLaw<T>, tau_grid: Option<&[T]>) -> Result<(Vec<f64>, Vec<f64>)> {
    match law {
        MixingLaw::InvGammaSq { .. } => {
            let grid: Vec<f64> = match tau_grid {
                Some(g) => g.iter().map(|t| t.as_f64()).collect(),
                None => law.default_grid().iter().map(|t| t.as_f64()).collect(),
            };
            if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                return Err(Error::InvalidArgument("tau grid must be nonempty and positive".into()));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument("tau grid must be strictly increasing".into()));
            }
            let widths = cell_widths(&grid);
            let logw = grid
                .iter()
                .zip(&widths)
                .map(|(&t, &w)| law.ln_density(t).expect("continuous law") + w.ln())
                .collect();
            Ok((grid, logw))
        }
        MixingLaw::PointMass(t) => {
            check_atoms(tau_grid, std::slice::from_ref(t))?;
            Ok((vec![t.as_f64()], vec![0.0]))
        }
        MixingLaw::Discrete { taus, weights } => {
            check_atoms(tau_grid, taus)?;
            Ok((
                taus.iter().map(|t| t.as_f64()).collect(),
                weights.iter().map(|w| w.as_f64().ln()).collect(),
            ))
        }
    }
}

fn check_atoms<T: Scalar>(tau_grid: Option<&[T]>, atoms: &[T]) -> Result<()> {
    match tau_grid {
        Some(g) if g != atoms => Err(Error::InvalidArgument(
            "a discrete mixing law is integrated over its own atoms; omit the tau grid".into(),
        )),
        _ => Ok(()),
    }
}

/// Posterior for a Gaussian scale-mixture prior, integrating `τ` over a grid
/// (the law's default grid when `tau_grid` is `None`).
pub fn mixture_posterior<T: Scalar>(
    obs: &Observation<T>,
    op: &ForwardOperator<T>,
    prior: &MixturePrior<T>,
    tau_grid: Option<&[T]>,
) -> Result<PosteriorResult<T>> {
    check_truncation(obs, prior.truncation())?;
    let a = diagonal_entries(op, prior.truncation())?;
    let base = prior.component(T::one())?.sds();
    let (grid, log_prior) = prior_grid(prior.law(), tau_grid)?;
    let n = obs.n().as_f64();
    let log_post: Vec<f64> = grid
        .iter()
        .zip(&log_prior)
        .map(|(&t, &lp)| lp + log_marginal(obs.y(), n, &a, &base, t))
        .collect();
    let top = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::NonFinite("tau posterior weights"));
    }
    let raw: Vec<f64> = log_post.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    if weights.len() >= 3 {
        for (side, mass) in [("lower", weights[0]), ("upper", weights[weights.len() - 1])] {
            if mass > ENDPOINT_MASS_LIMIT {
                return Err(Error::GridTooNarrow { side, mass });
            }
        }
    }
    let components: Vec<GaussianComponent<T>> = grid
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| {
            let sds: Vec<T> = base.iter().map(|&s| s * T::of(t)).collect();
            GaussianComponent {
                weight: T::of(w),
                ..conjugate_component(obs, &a, &sds)
            }
        })
        .collect();
    let mut result = PosteriorResult::from_components(PosteriorKind::GridMixture, components);
    result.tau_weights = Some(grid.iter().zip(&weights).map(|(&t, &w)| (T::of(t), T::of(w))).collect());
    Ok(result)
}

/// Settings of the trans-dimensional sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub n_iter: usize,
    /// Defaults to 20% of `n_iter`.
    pub burn_in: Option<usize>,
    pub chains: usize,
    pub seed: u64,
    /// Birth/death proposals per iteration.
    pub dimension_moves: usize,
    /// Random-walk step as a multiple of the conditional posterior scale
    /// (Laplace coefficients only).
    pub rw_scale: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 4000,
            burn_in: None,
            chains: 4,
            seed: 0,
            dimension_moves: 5,
            rw_scale: 2.4,
        }
    }
}

impl McmcConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.n_iter / 5)
    }
}

/// Sufficient statistics of the likelihood restricted to `V_{M_max+1}`:
/// `ℓ(f) = n Σ f_k r_k − (n/2) fᵀ G f`.
struct SeriesLikelihood<T> {
    n: T,
    gram: DenseMatrix<T>,
    r: Vec<T>,
}

impl<T: Scalar> SeriesLikelihood<T> {
    fn new(obs: &Observation<T>, op: &ForwardOperator<T>, m_max: usize) -> Result<Self> {
        let imgs = images(op, m_max + 1)?;
        if let Some(needed) = imgs.iter().filter_map(|img| img.last().map(|e| e.0 + 1)).max() {
            if needed > obs.j_obs() {
                return Err(Error::TruncationLoss {
                    needed,
                    observed: obs.j_obs(),
                });
            }
        }
        Ok(Self {
            n: obs.n(),
            gram: gram_from_images(&imgs),
            r: imgs.iter().map(|img| dense_sparse_dot(obs.y().coeffs(), img)).collect(),
        })
    }

    /// `(G f)_k` for 0-based `k`.
    fn gf(&self, f: &[T], k: usize) -> T {
        f.iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &x)| acc + self.gram[(k, i)] * x)
    }

    /// Change in `ℓ` from appending coordinate `f.len()` with value `x`.
    fn birth_delta(&self, f: &[T], x: T) -> f64 {
        let k = f.len();
        let n = self.n.as_f64();
        let x = x.as_f64();
        let cross = self.gf(f, k).as_f64();
        n * x * self.r[k].as_f64() - 0.5 * n * (2.0 * x * cross + self.gram[(k, k)].as_f64() * x * x)
    }

    /// Change in `ℓ` from adding `delta` to coordinate `k` (0-based).
    fn shift_delta(&self, f: &[T], k: usize, delta: T) -> f64 {
        let n = self.n.as_f64();
        let d = delta.as_f64();
        let gf = self.gf(f, k).as_f64();
        n * d * (self.r[k].as_f64() - gf) - 0.5 * n * self.gram[(k, k)].as_f64() * d * d
    }
}

#[derive(Default, Clone, Copy)]
struct MoveCounts {
    proposed: u64,
    accepted: u64,
}

impl MoveCounts {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

struct ChainOutput<T> {
    samples: Vec<Vec<T>>,
    m_trace: Vec<usize>,
    birth: MoveCounts,
    death: MoveCounts,
    within: MoveCounts,
}

struct SeriesChain<'a, T> {
    lik: &'a SeriesLikelihood<T>,
    prior: &'a SeriesPrior<T>,
    cfg: &'a McmcConfig,
}

impl<T: Scalar> SeriesChain<'_, T> {
    fn run(&self, chain: usize) -> Result<ChainOutput<T>> {
        let mut rng = stream(self.cfg.seed, &[chain as u64]);
        let mut f: Vec<T> = Vec::new();
        let burn = self.cfg.burn_in();
        let mut out = ChainOutput {
            samples: Vec::with_capacity(self.cfg.n_iter - burn),
            m_trace: Vec::with_capacity(self.cfg.n_iter),
            birth: MoveCounts::default(),
            death: MoveCounts::default(),
            within: MoveCounts::default(),
        };
        for it in 0..self.cfg.n_iter {
            for _ in 0..self.cfg.dimension_moves {
                self.dimension_move(&mut f, &mut rng, &mut out, it >= burn);
            }
            match self.prior.density {
                CoefficientDensity::Gaussian => self.gibbs(&mut f, &mut rng)?,
                CoefficientDensity::Laplace => {
                    let within = self.random_walk(&mut f, &mut rng);
                    if it >= burn {
                        out.within.proposed += within.proposed;
                        out.within.accepted += within.accepted;
                    }
                }
            }
            out.m_trace.push(f.len());
            if it >= burn {
                out.samples.push(f.clone());
            }
        }
        Ok(out)
    }

    fn dimension_move<R: Rng>(&self, f: &mut Vec<T>, rng: &mut R, out: &mut ChainOutput<T>, record: bool) {
        let m = f.len();
        if rng.random::<bool>() {
            if m >= self.prior.m_max {
                return;
            }
            let x = self.prior.kappa.at(m + 1) * T::of(self.prior.density.sample(rng));
            let log_ratio = self.lik.birth_delta(f, x) + self.prior.log_pm(m + 1) - self.prior.log_pm(m);
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept {
                f.push(x);
            }
            if record {
                out.birth.record(accept);
            }
        } else {
            if m == 0 {
                return;
            }
            let x = f[m - 1];
            let log_ratio = -self.lik.birth_delta(&f[..m - 1], x) + self.prior.log_pm(m - 1) - self.prior.log_pm(m);
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept {
                f.pop();
            }
            if record {
                out.death.record(accept);
            }
        }
    }

    /// Exact draw of `f | M, y` for Gaussian coefficients.
    fn gibbs<R: Rng>(&self, f: &mut [T], rng: &mut R) -> Result<()> {
        let m = f.len();
        if m == 0 {
            return Ok(());
        }
        let n = self.lik.n;
        let mut precision = DenseMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                precision[(i, j)] = n * self.lik.gram[(i, j)];
            }
            let k = self.prior.kappa.at(i + 1);
            precision[(i, i)] += (k * k).recip();
        }
        let chol = Cholesky::new(&precision)?;
        let rhs: Vec<T> = self.lik.r[..m].iter().map(|&r| n * r).collect();
        let mean = chol.solve(&rhs)?;
        let mut z: Vec<T> = (0..m)
            .map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                T::of(v)
            })
            .collect();
        chol.back_substitute(&mut z);
        for ((fi, mi), zi) in f.iter_mut().zip(mean).zip(z) {
            *fi = mi + zi;
        }
        Ok(())
    }

    /// One random-walk Metropolis sweep over the coordinates.
    fn random_walk<R: Rng>(&self, f: &mut [T], rng: &mut R) -> MoveCounts {
        let mut counts = MoveCounts::default();
        let n = self.lik.n.as_f64();
        for k in 0..f.len() {
            let kappa = self.prior.kappa.at(k + 1).as_f64();
            let step = self.cfg.rw_scale / (n * self.lik.gram[(k, k)].as_f64() + kappa.powi(-2)).sqrt();
            let z: f64 = StandardNormal.sample(rng);
            let delta = T::of(step * z);
            let new = f[k] + delta;
            let log_ratio = self.lik.shift_delta(f, k, delta) + self.prior.log_coefficient_density(k + 1, new)
                - self.prior.log_coefficient_density(k + 1, f[k]);
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept {
                f[k] = new;
            }
            counts.record(accept);
        }
        counts
    }
}

/// Samples the posterior of the random series prior.
///
/// Gaussian coefficients use exact Gibbs draws of `f | M`; Laplace
/// coefficients use random-walk Metropolis. `M` moves by birth/death with the
/// new coordinate proposed from its prior.
pub fn series_posterior_mcmc<T: Scalar>(
    obs: &Observation<T>,
    op: &ForwardOperator<T>,
    prior: &SeriesPrior<T>,
    cfg: &McmcConfig,
) -> Result<PosteriorResult<T>> {
    if cfg.chains == 0 || cfg.n_iter == 0 || cfg.burn_in() >= cfg.n_iter {
        return Err(Error::InvalidArgument(format!(
            "need chains >= 1 and burn-in < n_iter (chains = {}, n_iter = {}, burn-in = {})",
            cfg.chains,
            cfg.n_iter,
            cfg.burn_in()
        )));
    }
    if prior.m_max > obs.j_obs() {
        return Err(Error::TruncationLoss {
            needed: prior.m_max,
            observed: obs.j_obs(),
        });
    }
    let lik = SeriesLikelihood::new(obs, op, prior.m_max)?;
    let runner = SeriesChain { lik: &lik, prior, cfg };
    let chains: Vec<ChainOutput<T>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| runner.run(c))
        .collect::<Result<_>>()?;

    let mut within = MoveCounts::default();
    let mut birth = MoveCounts::default();
    let mut death = MoveCounts::default();
    for c in &chains {
        for (acc, part) in [(&mut within, c.within), (&mut birth, c.birth), (&mut death, c.death)] {
            acc.proposed += part.proposed;
            acc.accepted += part.accepted;
        }
    }
    let within_acceptance =
        (prior.density == CoefficientDensity::Laplace && within.proposed > 0).then(|| within.rate());
    if let Some(rate) = within_acceptance {
        if rate < MIN_ACCEPTANCE {
            return Err(Error::LowAcceptance {
                rate,
                floor: MIN_ACCEPTANCE,
            });
        }
    }

    let samples: Vec<CoefficientVector<T>> = chains
        .iter()
        .flat_map(|c| c.samples.iter())
        .map(|s| CoefficientVector::from_vec_unchecked(s.clone()))
        .collect();
    let len = samples.iter().map(|s| s.len()).max().unwrap_or(0);
    let total = samples.len() as f64;
    let mut mean_stderr = Vec::with_capacity(len);
    let mut means = Vec::with_capacity(len);
    let mut variances = Vec::with_capacity(len);
    for i in 1..=len {
        let series: Vec<f64> = samples.iter().map(|s| s.coord(i).as_f64()).collect();
        let m = series.iter().sum::<f64>() / total;
        let v = series.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / total;
        means.push(T::of(m));
        variances.push(T::of(v));
        mean_stderr.push(batch_means_stderr(&series));
    }
    let m_trace: Vec<Vec<usize>> = chains.into_iter().map(|c| c.m_trace).collect();
    let burn = cfg.burn_in();
    let kept: Vec<Vec<f64>> = m_trace
        .iter()
        .map(|t| t[burn..].iter().map(|&m| m as f64).collect())
        .collect();
    let pooled: Vec<f64> = kept.concat();
    let diagnostics = McmcDiagnostics {
        chains: cfg.chains,
        n_iter: cfg.n_iter,
        burn_in: burn,
        within_acceptance,
        birth_acceptance: birth.rate(),
        death_acceptance: death.rate(),
        m_ess: effective_sample_size(&pooled),
        m_rhat: split_rhat(&kept),
        m_trace,
        mean_stderr,
    };
    Ok(PosteriorResult {
        kind: PosteriorKind::Samples,
        means,
        variances,
        components: Vec::new(),
        samples,
        tau_weights: None,
        diagnostics: Some(diagnostics),
    })
}

/// `‖f‖² ` split as a prefix sum array so that `Σ_{i>J} f_i²` is O(1).
fn tail_sums<T: Scalar>(f0: &CoefficientVector<T>) -> Vec<f64> {
    let mut tails = vec![0.0; f0.len() + 1];
    for i in (0..f0.len()).rev() {
        let x = f0.coeffs()[i].as_f64();
        tails[i] = tails[i + 1] + x * x;
    }
    tails
}

fn tail_from(tails: &[f64], j: usize) -> f64 {
    tails.get(j).copied().unwrap_or(0.0)
}

/// Posterior distances `‖f − f₀‖_0`: exact kinds are sampled with
/// [`RADIUS_DRAWS`] draws from stream `seed`; samples are used as stored.
pub fn posterior_distances<T: Scalar>(post: &PosteriorResult<T>, f0: &CoefficientVector<T>, seed: u64) -> Vec<f64> {
    let tails = tail_sums(f0);
    match post.kind {
        PosteriorKind::Samples => post
            .samples
            .iter()
            .map(|s| {
                let head: f64 = s
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let d = (x - f0.coord(i + 1)).as_f64();
                        d * d
                    })
                    .sum();
                (head + tail_from(&tails, s.len())).sqrt()
            })
            .collect(),
        PosteriorKind::Exact | PosteriorKind::GridMixture => {
            let comps = &post.components;
            let mut cumulative = Vec::with_capacity(comps.len());
            let mut acc = 0.0;
            for c in comps {
                acc += c.weight.as_f64();
                cumulative.push(acc);
            }
            let prepared: Vec<(Vec<f64>, Vec<f64>, f64)> = comps
                .iter()
                .map(|c| {
                    let centre = c
                        .means
                        .iter()
                        .enumerate()
                        .map(|(i, &m)| (m - f0.coord(i + 1)).as_f64())
                        .collect();
                    let sd = c.variances.iter().map(|v| v.as_f64().sqrt()).collect();
                    (centre, sd, tail_from(&tails, c.means.len()))
                })
                .collect();
            let mut rng = stream(seed, &[]);
            (0..RADIUS_DRAWS)
                .map(|_| {
                    let u = rng.random::<f64>() * acc;
                    let k = cumulative.partition_point(|&c| c <= u).min(prepared.len() - 1);
                    let (centre, sd, tail) = &prepared[k];
                    let head: f64 = centre
                        .iter()
                        .zip(sd)
                        .map(|(&c, &s)| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            let d = c + s * z;
                            d * d
                        })
                        .sum();
                    (head + tail).sqrt()
                })
                .collect()
        }
    }
}

/// Smallest `ε` with `Π(‖f − f₀‖_0 <= ε | Y) >= q`, for each `q`.
pub fn contraction_radii<T: Scalar>(
    post: &PosteriorResult<T>,
    f0: &CoefficientVector<T>,
    qs: &[f64],
    seed: u64,
) -> Result<Vec<T>> {
    if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "radius level must lie in (0, 1), got {q}"
        )));
    }
    let mut d = posterior_distances(post, f0, seed);
    if d.is_empty() {
        return Err(Error::InvalidArgument("posterior holds no draws".into()));
    }
    d.sort_by(f64::total_cmp);
    Ok(qs.iter().map(|&q| T::of(sorted_quantile(&d, q))).collect())
}

pub fn contraction_radius<T: Scalar>(
    post: &PosteriorResult<T>,
    f0: &CoefficientVector<T>,
    q: f64,
    seed: u64,
) -> Result<T> {
    Ok(contraction_radii(post, f0, &[q], seed)?[0])
}

/// `‖E[f | Y] − f₀‖_0`.
pub fn posterior_mean_error<T: Scalar>(post: &PosteriorResult<T>, f0: &CoefficientVector<T>) -> T {
    let tails = tail_sums(f0);
    let head: f64 = post
        .means
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let d = (m - f0.coord(i + 1)).as_f64();
            d * d
        })
        .sum();
    T::of((head + tail_from(&tails, post.means.len())).sqrt())
}
