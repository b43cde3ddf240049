//! Rate studies: simulate, infer and measure over an `(n, replicate)` grid,
//! then fit log-log slopes to the per-`n` medians.

use rayon::prelude::*;
use scale_bayes_core::galerkin::galerkin_error_curve;
use scale_bayes_core::model::{simulate, Observation};
use scale_bayes_core::operators::ForwardOperator;
use scale_bayes_core::posterior::{
    conjugate_posterior, contraction_radii, mixture_posterior, posterior_mean_error, series_posterior_mcmc,
    PosteriorResult,
};
use scale_bayes_core::priors::{prior_mass_curve, small_ball_fit, PriorMassPoint, PriorSpec, SeriesPrior};
use scale_bayes_core::rates::{fit_slope, theoretical_exponent, LinearFit, PriorKind, RateQuery};
use scale_bayes_core::rng::derive_key;
use scale_bayes_core::scales::CoefficientVector;
use scale_bayes_core::stats::median;
use serde::Serialize;

use crate::config::{ExperimentConfig, PriorConfig, ScaleConfig};
use crate::error::{HarnessError, Result};

pub const VERSION: &str = concat!("scale-bayes ", env!("CARGO_PKG_VERSION"));

/// One `(n, replicate)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub n: f64,
    pub replicate: u64,
    /// Stream key for radius draws and sampler chains in this cell.
    pub seed: u64,
    /// Contraction radii, aligned with the configured quantiles.
    pub radii: Vec<f64>,
    /// `‖E[f | Y] − f₀‖_0`.
    pub rmse: f64,
}

/// Medians over replicates at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianRow {
    pub n: f64,
    pub radii: Vec<f64>,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFit {
    pub statistic: String,
    pub fit: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub medians: Vec<MedianRow>,
    /// Fits of the median `radius_q*` columns and of `rmse`; empty for
    /// grids with fewer than three points.
    pub slopes: Vec<NamedFit>,
    pub exponent: f64,
    pub pass: Option<bool>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    /// Fit of the median `q = 0.5` radius, the statistic the tolerance applies to.
    pub fn primary_slope(&self) -> Option<&LinearFit> {
        self.slope_of("radius_q50")
    }

    pub fn slope_of(&self, statistic: &str) -> Option<&LinearFit> {
        self.slopes.iter().find(|s| s.statistic == statistic).map(|s| &s.fit)
    }
}

/// Column name of a radius quantile, e.g. `radius_q50`.
pub fn quantile_label(q: f64) -> String {
    format!("radius_q{}", (q * 100.0).round() as u32)
}

/// Theoretical exponent of the configured study. A mixture prior with
/// `β > α` has no theorem behind it; its minimax exponent is used and a note
/// records the violated hypothesis.
pub fn expected_exponent(cfg: &ExperimentConfig) -> Result<(f64, Vec<String>)> {
    let mut q = RateQuery {
        prior: cfg.prior.kind(),
        alpha: cfg.prior.alpha(),
        beta: cfg.truth.beta,
        gamma: cfg.gamma(),
        d: cfg.dim(),
    };
    match theoretical_exponent(&q) {
        Ok(e) => Ok((e, Vec::new())),
        Err(scale_bayes_core::Error::HypothesisViolation(msg)) if q.prior == PriorKind::Mixture => {
            q.alpha = None;
            let e = theoretical_exponent(&q)?;
            Ok((e, vec![format!("{msg}; comparing against the minimax exponent {e:.6}")]))
        }
        Err(e) => Err(e.into()),
    }
}

/// Objects shared by every cell of a study.
pub struct Study {
    pub cfg: ExperimentConfig,
    pub op: ForwardOperator<f64>,
    pub f0: CoefficientVector<f64>,
    pub j_obs: usize,
    series: Option<SeriesPrior<f64>>,
}

impl Study {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let op = cfg.build_operator()?;
        let needs_diagonal = !matches!(cfg.prior, PriorConfig::Series { .. });
        if needs_diagonal && !op.is_diagonal() {
            return Err(HarnessError::Config(format!(
                "{} prior needs a diagonal operator, got {}",
                cfg.prior.kind_name(),
                op.label()
            )));
        }
        let series = match cfg.prior {
            PriorConfig::Series { .. } => Some(cfg.build_series()?),
            _ => None,
        };
        Ok(Self {
            op,
            f0: cfg.build_truth()?,
            j_obs: cfg.observed_len(),
            series,
            cfg: cfg.clone(),
        })
    }

    /// Posterior of the configured family at the observation's `n`.
    pub fn posterior(&self, obs: &Observation<f64>, seed: u64) -> Result<PosteriorResult<f64>> {
        let cfg = &self.cfg;
        let n = obs.n();
        Ok(match &cfg.prior {
            PriorConfig::Gaussian { .. } => {
                conjugate_posterior(obs, &self.op, &cfg.build_gaussian(cfg.prior_truncation(n))?)?
            }
            PriorConfig::Mixture { .. } => mixture_posterior(
                obs,
                &self.op,
                &cfg.build_mixture(cfg.prior_truncation(n))?,
                cfg.tau_grid.as_deref(),
            )?,
            PriorConfig::Series { .. } => {
                let prior = self.series.as_ref().expect("series prior built with the study");
                let mcmc = cfg.mcmc.unwrap_or_default().with_seed(seed);
                series_posterior_mcmc(obs, &self.op, prior, &mcmc)?
            }
        })
    }

    pub fn observe(&self, n: f64, replicate: u64) -> Result<Observation<f64>> {
        Ok(simulate(&self.op, &self.f0, n, self.j_obs, self.cfg.seed, replicate)?)
    }

    fn cell(&self, n_index: usize, n: f64, replicate: u64) -> Result<ResultRow> {
        let seed = derive_key(self.cfg.seed, &[n_index as u64, replicate]);
        let wrap = |source| HarnessError::Cell { n, replicate, source };
        let obs = simulate(&self.op, &self.f0, n, self.j_obs, self.cfg.seed, replicate).map_err(wrap)?;
        let post = match self.posterior(&obs, seed) {
            Ok(p) => p,
            Err(HarnessError::Numerical(e)) => return Err(wrap(e)),
            Err(e) => return Err(e),
        };
        let radii = contraction_radii(&post, &self.f0, &self.cfg.quantiles, seed).map_err(wrap)?;
        Ok(ResultRow {
            n,
            replicate,
            seed,
            radii,
            rmse: posterior_mean_error(&post, &self.f0),
        })
    }
}

/// Runs every `(n, replicate)` cell (in parallel; results do not depend on
/// the thread count), aggregates medians and fits slopes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let study = Study::new(cfg)?;
    let (exponent, notes) = expected_exponent(cfg)?;
    let grid = cfg.n_grid.values();
    let cells: Vec<(usize, f64, u64)> = grid
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..cfg.replicates as u64).map(move |r| (k, n, r)))
        .collect();
    let rows: Vec<ResultRow> = cells
        .par_iter()
        .map(|&(k, n, r)| study.cell(k, n, r))
        .collect::<Result<_>>()?;
    let medians = medians_by_n(&rows, cfg.quantiles.len())?;
    let slopes = fit_medians(&medians, &cfg.quantiles)?;
    let pass = slopes.first().map(|s| (s.fit.slope + exponent).abs() <= cfg.tolerance);
    Ok(ExperimentResult {
        config: cfg.clone(),
        rows,
        medians,
        slopes,
        exponent,
        pass,
        notes,
        provenance: Provenance {
            config_hash: cfg.hash(),
            master_seed: cfg.seed,
            version: VERSION.into(),
        },
    })
}

/// Rows must be sorted by `n`.
pub fn medians_by_n(rows: &[ResultRow], n_quantiles: usize) -> Result<Vec<MedianRow>> {
    let mut out = Vec::new();
    for group in rows.chunk_by(|a, b| a.n == b.n) {
        let radii = (0..n_quantiles)
            .map(|k| median(&group.iter().map(|r| r.radii[k]).collect::<Vec<_>>()))
            .collect::<scale_bayes_core::Result<Vec<f64>>>()?;
        let rmse = median(&group.iter().map(|r| r.rmse).collect::<Vec<_>>())?;
        out.push(MedianRow {
            n: group[0].n,
            radii,
            rmse,
        });
    }
    Ok(out)
}

/// The median `q = 0.5` fit comes first, then the other quantiles, then `rmse`.
fn fit_medians(medians: &[MedianRow], quantiles: &[f64]) -> Result<Vec<NamedFit>> {
    if medians.len() < 3 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..quantiles.len()).collect();
    order.sort_by_key(|&k| quantiles[k] != 0.5);
    let mut fits = Vec::new();
    for k in order {
        let pts: Vec<(f64, f64)> = medians.iter().map(|m| (m.n, m.radii[k])).collect();
        fits.push(NamedFit {
            statistic: quantile_label(quantiles[k]),
            fit: fit_slope(&pts)?,
        });
    }
    let pts: Vec<(f64, f64)> = medians.iter().map(|m| (m.n, m.rmse)).collect();
    fits.push(NamedFit {
        statistic: "rmse".into(),
        fit: fit_slope(&pts)?,
    });
    Ok(fits)
}

/// Noiseless Galerkin reconstruction errors over the configured levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinReport {
    pub levels: Vec<usize>,
    pub errors: Vec<f64>,
    pub fit: Option<LinearFit>,
    /// `−(β + offset)/d` for rule-based truths on power scales.
    pub expected_slope: Option<f64>,
}

pub fn run_galerkin(cfg: &ExperimentConfig) -> Result<GalerkinReport> {
    let levels = cfg
        .galerkin
        .as_ref()
        .map(|g| g.levels.clone())
        .ok_or_else(|| HarnessError::Config("galerkin run needs `galerkin.levels`".into()))?;
    let op = cfg.build_operator()?;
    let f0 = cfg.build_truth()?;
    let curve = galerkin_error_curve(&op, &f0, &levels)?;
    let errors: Vec<f64> = curve.iter().map(|p| p.1).collect();
    let fit = if levels.len() >= 3 {
        let pts: Vec<(f64, f64)> = curve.iter().map(|&(j, e)| (j as f64, e)).collect();
        Some(fit_slope(&pts)?)
    } else {
        None
    };
    let expected_slope = match (&cfg.scale, &cfg.truth.coefficients) {
        (ScaleConfig::Power { d }, None) => Some(-(cfg.truth.beta + cfg.truth.offset) / d),
        _ => None,
    };
    Ok(GalerkinReport {
        levels,
        errors,
        fit,
        expected_slope,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorMassReport {
    pub points: Vec<PriorMassPoint>,
    /// Line of `−log P̂` against `ε^{-exponent}`.
    pub fit: Option<LinearFit>,
    pub exponent: Option<f64>,
}

/// Monte-Carlo prior mass of `‖Af − Af₀‖ < ε` (or `‖Af‖ < ε` when centred).
/// The default abscissa exponent is `d/(α + γ − d/2)`.
pub fn run_prior_mass(cfg: &ExperimentConfig) -> Result<PriorMassReport> {
    let pm = cfg
        .prior_mass
        .as_ref()
        .ok_or_else(|| HarnessError::Config("prior-mass run needs a `prior_mass` section".into()))?;
    let op = cfg.build_operator()?;
    let prior = match &cfg.prior {
        PriorConfig::Series { .. } => PriorSpec::Series(cfg.build_series()?),
        PriorConfig::Gaussian { .. } => PriorSpec::Gaussian(cfg.build_gaussian(pm.truncation)?),
        PriorConfig::Mixture { .. } => PriorSpec::Mixture(cfg.build_mixture(pm.truncation)?),
    };
    let f0 = if pm.centered {
        CoefficientVector::zeros(1)
    } else {
        cfg.build_truth()?
    };
    let points = prior_mass_curve(&prior, &op, &f0, &pm.epsilons, pm.draws, cfg.seed)?;
    let d = cfg.dim();
    let exponent = pm
        .exponent
        .or_else(|| cfg.prior.alpha().map(|a| d / (a + cfg.gamma() - d / 2.0)));
    let fit = match exponent {
        Some(e) if points.iter().filter(|p| p.reliable).count() >= 3 => Some(small_ball_fit(&points, e)?),
        _ => None,
    };
    Ok(PriorMassReport { points, fit, exponent })
}
