//! Contraction-rate exponents and log-log slope fitting.
//!
//! A rate `n^{-e}` is represented by its exponent `e > 0`:
//!
//! | prior    | exponent                          |
//! |----------|-----------------------------------|
//! | series   | `β / (2β + 2γ + d)` (up to logs)  |
//! | gaussian | `((α − d/2) ∧ β) / (2α + 2γ)`     |
//! | mixture  | `β / (2β + 2γ + d)`, for `β <= α` |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Series,
    Gaussian,
    Mixture,
}

/// Parameters of a rate question: prior family, prior smoothness `α` (for
/// the Gaussian families), truth smoothness `β`, ill-posedness `γ` and
/// dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQuery {
    pub prior: PriorKind,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub d: f64,
}

impl RateQuery {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("d", self.d)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        match (self.prior, self.alpha) {
            (PriorKind::Gaussian, None) => Err(Error::InvalidArgument("gaussian prior needs alpha".into())),
            (PriorKind::Gaussian | PriorKind::Mixture, Some(a)) if !(a > self.d / 2.0) => {
                Err(Error::HypothesisViolation(format!(
                    "Gaussian priors need alpha > d/2 (alpha = {a}, d = {})",
                    self.d
                )))
            }
            (PriorKind::Mixture, Some(a)) if self.beta > a => Err(Error::HypothesisViolation(format!(
                "scale-mixture rate requires beta <= alpha (beta = {}, alpha = {a})",
                self.beta
            ))),
            _ => Ok(()),
        }
    }

    /// `2β + 2γ + d`.
    fn minimax_denominator(&self) -> f64 {
        2.0 * self.beta + 2.0 * self.gamma + self.d
    }
}

/// Exponent `e` of the contraction rate `n^{-e}`.
pub fn theoretical_exponent(q: &RateQuery) -> Result<f64> {
    q.validate()?;
    Ok(match q.prior {
        PriorKind::Series | PriorKind::Mixture => q.beta / q.minimax_denominator(),
        PriorKind::Gaussian => {
            let a = q.alpha.expect("validated");
            (a - q.d / 2.0).min(q.beta) / (2.0 * a + 2.0 * q.gamma)
        }
    })
}

/// Exponents of the auxiliary sequences `ε_n = n^{-epsilon}`, `j_n = n^{j}`,
/// `η_n = n^{-eta}` and, for scale-mixture priors, the deterministic scaling
/// `τ_n = n^{tau}` that attains the adaptive rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryExponents {
    pub epsilon_exponent: f64,
    pub j_exponent: f64,
    pub eta_exponent: f64,
    pub tau_exponent: Option<f64>,
}

pub fn auxiliary_sequences(q: &RateQuery) -> Result<AuxiliaryExponents> {
    let eta = theoretical_exponent(q)?;
    let den = q.minimax_denominator();
    Ok(match q.prior {
        PriorKind::Series => AuxiliaryExponents {
            epsilon_exponent: (q.beta + q.gamma) / den,
            j_exponent: q.d / den,
            eta_exponent: eta,
            tau_exponent: None,
        },
        PriorKind::Gaussian => {
            let a = q.alpha.expect("validated");
            AuxiliaryExponents {
                epsilon_exponent: ((a - q.d / 2.0).min(q.beta) + q.gamma) / (2.0 * a + 2.0 * q.gamma),
                j_exponent: q.d / (2.0 * a + 2.0 * q.gamma),
                eta_exponent: eta,
                tau_exponent: None,
            }
        }
        PriorKind::Mixture => AuxiliaryExponents {
            epsilon_exponent: (q.beta + q.gamma) / den,
            j_exponent: q.d / den,
            eta_exponent: eta,
            tau_exponent: q.alpha.map(|a| (a - q.d / 2.0 - q.beta) / den),
        },
    })
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (zero for an exact fit or two points).
    pub stderr: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ys.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least two points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit {
        slope,
        intercept,
        stderr,
        r2,
    })
}

/// Slope of `log(value)` against `log(n)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least three points, got {}",
            points.len()
        )));
    }
    if let Some(&(n, v)) = points.iter().find(|(n, v)| !(*n > 0.0) || !(*v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs positive data, got ({n}, {v})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    linear_fit(&xs, &ys)
}
