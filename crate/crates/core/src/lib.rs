//! Numerical core for Bayesian linear inverse problems in the Gaussian
//! sequence model: smoothness scales, forward operators, Galerkin inversion,
//! priors, posterior engines and contraction-rate exponents.
//!
//! All math is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`, and the [`single`] module provides the `f32` versions.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod error;
pub mod galerkin;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod posterior;
pub mod priors;
pub mod rates;
pub mod rng;
pub mod scalar;
pub mod scales;
pub mod stats;

pub use error::{Error, Result};
pub use galerkin::{
    galerkin_error_curve, galerkin_solve, modified_galerkin_solve, operator_norm_rj, prior_galerkin_residual_curve,
};
pub use model::{kl, loglik, simulate, ObservationMeta};
pub use operators::{gram_matrix, smoothing_ratio, RangeCoordinate, VolterraVariant};
pub use posterior::{
    conjugate_posterior, contraction_radii, contraction_radius, mixture_posterior, posterior_mean_error,
    series_posterior_mcmc, McmcConfig, McmcDiagnostics, PosteriorKind,
};
pub use priors::{check_mixture_condition, prior_mass_curve, CoefficientDensity, PriorMassPoint};
pub use rates::{auxiliary_sequences, fit_slope, theoretical_exponent, LinearFit, PriorKind, RateQuery};
pub use scalar::Scalar;
pub use scales::{approx_number, dual_norm, norm, project, PairIndex};

pub type CoefficientVector = scales::CoefficientVector<f64>;
pub type SequenceScale = scales::SequenceScale<f64>;
pub type ForwardOperator = operators::ForwardOperator<f64>;
pub type DenseMatrix = linalg::DenseMatrix<f64>;
pub type GalerkinSystem<'a> = galerkin::GalerkinSystem<'a, f64>;
pub type Observation = model::Observation<f64>;
pub type SeriesPrior = priors::SeriesPrior<f64>;
pub type GaussianPrior = priors::GaussianPrior<f64>;
pub type MixturePrior = priors::MixturePrior<f64>;
pub type MixingLaw = priors::MixingLaw<f64>;
pub type Kappa = priors::Kappa<f64>;
pub type PriorSpec = priors::PriorSpec<f64>;
pub type PosteriorResult = posterior::PosteriorResult<f64>;

/// Single-precision aliases.
pub mod single {
    pub type CoefficientVector = crate::scales::CoefficientVector<f32>;
    pub type SequenceScale = crate::scales::SequenceScale<f32>;
    pub type ForwardOperator = crate::operators::ForwardOperator<f32>;
    pub type GalerkinSystem<'a> = crate::galerkin::GalerkinSystem<'a, f32>;
    pub type Observation = crate::model::Observation<f32>;
    pub type GaussianPrior = crate::priors::GaussianPrior<f32>;
    pub type PosteriorResult = crate::posterior::PosteriorResult<f32>;
}
