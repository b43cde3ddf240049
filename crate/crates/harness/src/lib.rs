//! Reproducible posterior contraction-rate experiments on top of
//! `scale_bayes_core`: JSON configs, a parallel `(n, replicate)` runner,
//! slope fits and the CSV/JSON/SVG artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiment::{
    expected_exponent, run_experiment, run_galerkin, run_prior_mass, ExperimentResult, GalerkinReport, PriorMassReport,
    ResultRow, Study,
};
pub use output::emit_outputs;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SCALE_BAYES_THREADS";

/// Thread count from an explicit value, else [`THREADS_ENV`], else `None`
/// (available parallelism).
pub fn thread_count(explicit: Option<usize>) -> Result<Option<usize>> {
    if let Some(k) = explicit {
        return Ok(Some(k));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| HarnessError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Sizes the global rayon pool. Only the first call has an effect.
pub fn init_threads(explicit: Option<usize>) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = thread_count(explicit)? {
        if k == 0 {
            return Err(HarnessError::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(k);
    }
    // A pool that already exists is fine.
    let _ = builder.build_global();
    Ok(())
}
