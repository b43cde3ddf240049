//! The white-noise sequence model `Y_i = (Af)_i + n^{-1/2} ξ_i`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::ForwardOperator;
use crate::rng::NoiseStream;
use crate::scalar::Scalar;
use crate::scales::CoefficientVector;

/// Replay metadata stored next to an exported observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMeta {
    pub n: f64,
    pub seed: u64,
    pub replicate: u64,
    pub op_label: String,
    pub j_obs: usize,
}

/// Observed range coefficients `y_1..y_{J_obs}` at noise level `n^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    y: CoefficientVector<T>,
    n: T,
    seed: u64,
    replicate: u64,
    op_label: String,
}

impl<T: Scalar> Observation<T> {
    pub fn new(y: CoefficientVector<T>, n: T, seed: u64, replicate: u64, op_label: impl Into<String>) -> Result<Self> {
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::InvalidArgument(format!("n must be positive, got {n}")));
        }
        if y.is_empty() {
            return Err(Error::InvalidArgument("observation needs J_obs >= 1".into()));
        }
        Ok(Self {
            y,
            n,
            seed,
            replicate,
            op_label: op_label.into(),
        })
    }

    pub fn y(&self) -> &CoefficientVector<T> {
        &self.y
    }

    pub fn n(&self) -> T {
        self.n
    }

    pub fn j_obs(&self) -> usize {
        self.y.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn op_label(&self) -> &str {
        &self.op_label
    }

    pub fn meta(&self) -> ObservationMeta {
        ObservationMeta {
            n: self.n.as_f64(),
            seed: self.seed,
            replicate: self.replicate,
            op_label: self.op_label.clone(),
            j_obs: self.j_obs(),
        }
    }

    /// `index,y` rows, 1-based, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,y\n");
        for (i, v) in self.y.coeffs().iter().enumerate() {
            writeln!(s, "{},{:e}", i + 1, v.as_f64()).expect("writing to a String");
        }
        s
    }

    /// Inverse of [`Observation::to_csv`] combined with its sidecar.
    pub fn from_csv(csv: &str, meta: &ObservationMeta) -> Result<Self> {
        let mut lines = csv.lines();
        match lines.next().map(str::trim) {
            Some("index,y") => {}
            other => {
                return Err(Error::InvalidArgument(format!(
                    "expected header `index,y`, got {other:?}"
                )))
            }
        }
        let mut y = Vec::new();
        for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let (idx, val) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidArgument(format!("malformed observation row `{line}`")))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad index `{idx}`")))?;
            if idx != row + 1 {
                return Err(Error::InvalidArgument(format!("expected index {}, got {idx}", row + 1)));
            }
            let val: f64 = val
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value `{val}`")))?;
            y.push(T::of(val));
        }
        if y.len() != meta.j_obs {
            return Err(Error::DimensionMismatch {
                expected: meta.j_obs,
                got: y.len(),
            });
        }
        Self::new(
            CoefficientVector::new(y)?,
            T::of(meta.n),
            meta.seed,
            meta.replicate,
            meta.op_label.clone(),
        )
    }
}

/// Draws `y = Af₀ + n^{-1/2} z` on the first `j_obs` range coordinates.
///
/// Coordinate `i` always receives the noise `z_i` of stream
/// `(seed, replicate, i)`, independently of `j_obs`.
pub fn simulate<T: Scalar>(
    op: &ForwardOperator<T>,
    f0: &CoefficientVector<T>,
    n: T,
    j_obs: usize,
    seed: u64,
    replicate: u64,
) -> Result<Observation<T>> {
    if !(n > T::zero()) {
        return Err(Error::InvalidArgument(format!("n must be positive, got {n}")));
    }
    if j_obs == 0 {
        return Err(Error::InvalidArgument("J_obs must be at least 1".into()));
    }
    let signal = op.apply(f0)?;
    let noise = NoiseStream::new(seed, replicate);
    let sigma = n.sqrt().recip();
    let y = (1..=j_obs)
        .map(|i| signal.coord(i) + sigma * T::of(noise.normal(i)))
        .collect();
    Observation::new(CoefficientVector::new(y)?, n, seed, replicate, op.label())
}

/// Image `Af`, rejected if it reaches past the observed coordinates.
pub(crate) fn observed_image<T: Scalar>(
    obs: &Observation<T>,
    f: &CoefficientVector<T>,
    op: &ForwardOperator<T>,
) -> Result<CoefficientVector<T>> {
    let af = op.apply(f)?;
    let support = af.support_len();
    if support > obs.j_obs() {
        return Err(Error::TruncationLoss {
            needed: support,
            observed: obs.j_obs(),
        });
    }
    Ok(af)
}

/// `log dP_f/dP_0 (y) = n Σ (Af)_i y_i − (n/2) Σ (Af)_i²`.
pub fn loglik<T: Scalar>(obs: &Observation<T>, f: &CoefficientVector<T>, op: &ForwardOperator<T>) -> Result<T> {
    let af = observed_image(obs, f, op)?;
    let n = obs.n();
    let cross = af.dot(obs.y());
    let sq = af.dot(&af);
    Ok(n * cross - n * sq / T::of(2.0))
}

/// `KL(P_{f₀} ‖ P_f) = n ‖Af − Af₀‖² / 2`.
pub fn kl<T: Scalar>(f: &CoefficientVector<T>, f0: &CoefficientVector<T>, op: &ForwardOperator<T>, n: T) -> Result<T> {
    let diff = op.apply(f)?.sub(&op.apply(f0)?);
    Ok(n * diff.dot(&diff) / T::of(2.0))
}
