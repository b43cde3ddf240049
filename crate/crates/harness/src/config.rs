//! JSON experiment configuration and its translation into core objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use scale_bayes_core::linalg::DenseMatrix;
use scale_bayes_core::operators::{ForwardOperator, VolterraVariant};
use scale_bayes_core::posterior::McmcConfig;
use scale_bayes_core::priors::{CoefficientDensity, GaussianPrior, Kappa, MixingLaw, MixturePrior, SeriesPrior};
use scale_bayes_core::rates::PriorKind;
use scale_bayes_core::scales::{CoefficientVector, PairIndex, SequenceScale};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Pairs tabulated for two-dimensional scales unless configured otherwise.
const DEFAULT_PAIR_CAPACITY: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleConfig {
    /// `b_i = i^{1/d}`.
    Power { d: f64 },
    /// `b = k·l·π²` over the product-ordered pairs.
    Volterra2d {
        #[serde(default = "default_pair_capacity")]
        capacity: usize,
    },
}

fn default_pair_capacity() -> usize {
    DEFAULT_PAIR_CAPACITY
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolterraKind {
    A,
    A0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    /// `a_i = b_i^{-γ}` for the configured scale.
    Diagonal {
        gamma: f64,
    },
    Poisson,
    Volterra2d {
        variant: VolterraKind,
    },
    /// Dense matrix read from a CSV file of numeric rows; relative paths are
    /// resolved against the config file.
    Matrix {
        path: PathBuf,
        gamma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityConfig {
    Gaussian,
    Laplace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaConfig {
    /// `κ_i = i^{-exponent}`.
    Power {
        exponent: f64,
    },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    InvGammaSq { shape: f64, rate: f64 },
    Point { tau: f64 },
    Discrete { taus: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    Series {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_density")]
        p: DensityConfig,
        #[serde(default)]
        kappa: Option<KappaConfig>,
        #[serde(default = "default_m_max")]
        m_max: usize,
    },
    Gaussian {
        alpha: f64,
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default)]
        truncation: Option<usize>,
    },
    Mixture {
        alpha: f64,
        q: LawConfig,
        #[serde(default)]
        truncation: Option<usize>,
    },
}

fn default_mu() -> f64 {
    5.0
}

fn default_density() -> DensityConfig {
    DensityConfig::Gaussian
}

fn default_m_max() -> usize {
    200
}

fn default_tau() -> f64 {
    1.0
}

impl PriorConfig {
    pub fn kind(&self) -> PriorKind {
        match self {
            Self::Series { .. } => PriorKind::Series,
            Self::Gaussian { .. } => PriorKind::Gaussian,
            Self::Mixture { .. } => PriorKind::Mixture,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Series { .. } => "series",
            Self::Gaussian { .. } => "gaussian",
            Self::Mixture { .. } => "mixture",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Self::Series { .. } => None,
            Self::Gaussian { alpha, .. } | Self::Mixture { alpha, .. } => Some(*alpha),
        }
    }

    fn fixed_truncation(&self) -> Option<usize> {
        match self {
            Self::Series { .. } => None,
            Self::Gaussian { truncation, .. } | Self::Mixture { truncation, .. } => *truncation,
        }
    }
}

/// Truth `f0_i = b_i^{-(β + d/2 + offset)}`, or explicit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub beta: f64,
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default = "default_truth_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
}

fn default_offset() -> f64 {
    0.05
}

fn default_truth_truncation() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NGridConfig {
    List(Vec<f64>),
    /// `points` log-spaced values from `from` to `to`.
    LogSpaced {
        from: f64,
        to: f64,
        points: usize,
    },
}

impl NGridConfig {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::List(v) => v.clone(),
            Self::LogSpaced { from, to, points } => match *points {
                0 => Vec::new(),
                1 => vec![*from],
                p => {
                    let (a, b) = (from.log10(), to.log10());
                    (0..p)
                        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (p - 1) as f64))
                        .collect()
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSettings {
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_dimension_moves")]
    pub dimension_moves: usize,
    #[serde(default = "default_rw_scale")]
    pub rw_scale: f64,
}

fn default_n_iter() -> usize {
    McmcConfig::default().n_iter
}

fn default_chains() -> usize {
    McmcConfig::default().chains
}

fn default_dimension_moves() -> usize {
    McmcConfig::default().dimension_moves
}

fn default_rw_scale() -> f64 {
    McmcConfig::default().rw_scale
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            n_iter: default_n_iter(),
            burn_in: None,
            chains: default_chains(),
            dimension_moves: default_dimension_moves(),
            rw_scale: default_rw_scale(),
        }
    }
}

impl McmcSettings {
    pub fn with_seed(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            chains: self.chains,
            seed,
            dimension_moves: self.dimension_moves,
            rw_scale: self.rw_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalerkinSettings {
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorMassSettings {
    pub epsilons: Vec<f64>,
    pub draws: usize,
    /// Prior truncation used for the draws.
    #[serde(default = "default_mass_truncation")]
    pub truncation: usize,
    /// Measure `‖Af‖` (centred) instead of `‖Af − Af₀‖`.
    #[serde(default)]
    pub centered: bool,
    /// Power `ε^{-exponent}` on the abscissa of the small-ball fit.
    #[serde(default)]
    pub exponent: Option<f64>,
}

fn default_mass_truncation() -> usize {
    256
}

fn default_quantiles() -> Vec<f64> {
    vec![0.5, 0.9]
}

fn default_replicates() -> usize {
    1
}

fn default_tolerance() -> f64 {
    0.05
}

/// One rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub scale: ScaleConfig,
    pub operator: OperatorConfig,
    pub prior: PriorConfig,
    pub truth: TruthConfig,
    pub n_grid: NGridConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Radius levels; must contain 0.5 and 0.9.
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Allowed `|slope + exponent|`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Overrides the observed coordinate count.
    #[serde(default)]
    pub j_obs: Option<usize>,
    /// Overrides the default mixing grid.
    #[serde(default)]
    pub tau_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub mcmc: Option<McmcSettings>,
    #[serde(default)]
    pub galerkin: Option<GalerkinSettings>,
    #[serde(default)]
    pub prior_mass: Option<PriorMassSettings>,
    /// Directory against which relative paths resolve; not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.n_grid.values();
        if grid.iter().any(|n| !(*n > 0.0) || !n.is_finite()) {
            return Err(config_err("n_grid values must be positive and finite"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("n_grid must be strictly increasing"));
        }
        if self.replicates == 0 {
            return Err(config_err("replicates must be at least 1"));
        }
        if self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(config_err("quantiles must lie in (0, 1)"));
        }
        for required in [0.5, 0.9] {
            if !self.quantiles.contains(&required) {
                return Err(config_err(format!("quantiles must include {required}")));
            }
        }
        if !(self.tolerance >= 0.0) {
            return Err(config_err("tolerance must be nonnegative"));
        }
        let t = &self.truth;
        if !(t.beta > 0.0) {
            return Err(config_err("truth beta must be positive"));
        }
        if t.coefficients.is_none() {
            // ‖f0‖_β² = Σ b_i^{-d - 2·offset}, finite only for offset > 0.
            if !(t.offset > 0.0) {
                return Err(config_err("truth offset must be positive so that ‖f0‖_β is finite"));
            }
            if t.truncation == 0 {
                return Err(config_err("truth truncation must be at least 1"));
            }
        }
        match (&self.scale, &self.operator) {
            (ScaleConfig::Power { d }, _) if !(*d > 0.0) => return Err(config_err("scale d must be positive")),
            (ScaleConfig::Power { .. }, OperatorConfig::Volterra2d { .. }) => {
                return Err(config_err("the Volterra operator needs the volterra2d scale"))
            }
            _ => {}
        }
        Ok(())
    }

    /// Canonical JSON (fields in declaration order).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn dim(&self) -> f64 {
        match self.scale {
            ScaleConfig::Power { d } => d,
            ScaleConfig::Volterra2d { .. } => 1.0,
        }
    }

    pub fn build_scale(&self) -> Result<SequenceScale<f64>> {
        Ok(match self.scale {
            ScaleConfig::Power { d } => SequenceScale::power(d)?,
            ScaleConfig::Volterra2d { capacity } => SequenceScale::volterra2d(capacity),
        })
    }

    fn pair_index(&self) -> PairIndex {
        match self.scale {
            ScaleConfig::Volterra2d { capacity } => PairIndex::with_capacity(capacity),
            ScaleConfig::Power { .. } => PairIndex::with_capacity(DEFAULT_PAIR_CAPACITY),
        }
    }

    pub fn build_operator(&self) -> Result<ForwardOperator<f64>> {
        Ok(match &self.operator {
            OperatorConfig::Diagonal { gamma } => {
                let len = match self.scale {
                    ScaleConfig::Volterra2d { capacity } => capacity,
                    ScaleConfig::Power { .. } => 0,
                };
                ForwardOperator::diagonal_for_scale(&self.build_scale()?, *gamma, len)?
            }
            OperatorConfig::Poisson => ForwardOperator::poisson_sine(),
            OperatorConfig::Volterra2d { variant } => {
                let v = match variant {
                    VolterraKind::A => VolterraVariant::A,
                    VolterraKind::A0 => VolterraVariant::A0,
                };
                ForwardOperator::volterra2d(v, self.pair_index())
            }
            OperatorConfig::Matrix { path, gamma } => {
                let path = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                ForwardOperator::dense(read_matrix(&path)?, *gamma)?
            }
        })
    }

    pub fn build_truth(&self) -> Result<CoefficientVector<f64>> {
        let t = &self.truth;
        if let Some(c) = &t.coefficients {
            return Ok(CoefficientVector::new(c.clone())?);
        }
        let scale = self.build_scale()?;
        let power = -(t.beta + self.dim() / 2.0 + t.offset);
        Ok(CoefficientVector::from_fn(t.truncation, |i| scale.b(i).powf(power))?)
    }

    /// Prior truncation at noise level `n`: the configured value, or
    /// `max(64, ⌈16·n^{e}⌉)` with `e` the larger of the minimax and prior
    /// dimension exponents.
    pub fn prior_truncation(&self, n: f64) -> usize {
        if let Some(j) = self.prior.fixed_truncation() {
            return j;
        }
        let d = self.dim();
        let gamma = self.gamma();
        let mut e = d / (2.0 * self.truth.beta + 2.0 * gamma + d);
        if let Some(alpha) = self.prior.alpha() {
            e = e.max(d / (2.0 * alpha + 2.0 * gamma));
        }
        64usize.max((16.0 * n.powf(e)).ceil() as usize)
    }

    /// Observed coordinates: configured, or four times the largest model
    /// dimension used over the grid.
    pub fn observed_len(&self) -> usize {
        if let Some(j) = self.j_obs {
            return j;
        }
        let widest = match &self.prior {
            PriorConfig::Series { m_max, .. } => *m_max,
            _ => self
                .n_grid
                .values()
                .iter()
                .map(|&n| self.prior_truncation(n))
                .max()
                .unwrap_or(64),
        };
        4 * widest
    }

    pub fn gamma(&self) -> f64 {
        match &self.operator {
            OperatorConfig::Diagonal { gamma } | OperatorConfig::Matrix { gamma, .. } => *gamma,
            OperatorConfig::Poisson => 2.0,
            OperatorConfig::Volterra2d { .. } => 1.0,
        }
    }

    pub fn build_series(&self) -> Result<SeriesPrior<f64>> {
        match &self.prior {
            PriorConfig::Series { mu, p, kappa, m_max } => {
                let density = match p {
                    DensityConfig::Gaussian => CoefficientDensity::Gaussian,
                    DensityConfig::Laplace => CoefficientDensity::Laplace,
                };
                let kappa = match kappa {
                    None => Kappa::Unit,
                    Some(KappaConfig::Power { exponent }) => Kappa::Power { exponent: *exponent },
                    Some(KappaConfig::Explicit(v)) => Kappa::Explicit(Arc::from(v.as_slice())),
                };
                Ok(SeriesPrior::new(*mu, density, kappa, *m_max)?)
            }
            _ => Err(config_err("not a series prior")),
        }
    }

    pub fn build_gaussian(&self, truncation: usize) -> Result<GaussianPrior<f64>> {
        match &self.prior {
            PriorConfig::Gaussian { alpha, tau, .. } => {
                Ok(GaussianPrior::new(*alpha, *tau, truncation, self.build_scale()?)?)
            }
            _ => Err(config_err("not a gaussian prior")),
        }
    }

    pub fn build_mixture(&self, truncation: usize) -> Result<MixturePrior<f64>> {
        match &self.prior {
            PriorConfig::Mixture { alpha, q, .. } => {
                let law = match q {
                    LawConfig::InvGammaSq { shape, rate } => MixingLaw::inv_gamma_sq(*shape, *rate)?,
                    LawConfig::Point { tau } => MixingLaw::PointMass(*tau),
                    LawConfig::Discrete { taus, weights } => MixingLaw::discrete(taus.clone(), weights.clone())?,
                };
                Ok(MixturePrior::new(*alpha, law, truncation, self.build_scale()?)?)
            }
            _ => Err(config_err("not a mixture prior")),
        }
    }
}

/// Reads a dense matrix from CSV: one row per line, comma separated. A
/// leading line that does not parse as numbers is treated as a header.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse = |line: &str| -> Option<Vec<f64>> { line.split(',').map(|x| x.trim().parse().ok()).collect() };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        match parse(line) {
            Some(r) => rows.push(r),
            None if k == 0 => continue,
            None => return Err(config_err(format!("{}: bad matrix row `{line}`", path.display()))),
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(config_err(format!(
            "{}: matrix rows must be nonempty and equally long",
            path.display()
        )));
    }
    let nrows = rows.len();
    Ok(DenseMatrix::from_row_major(nrows, cols, rows.concat())?)
}
