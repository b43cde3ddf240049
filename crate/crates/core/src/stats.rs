//! Small statistical helpers: quantiles, two-sample tests and MCMC
//! diagnostics.

use crate::error::{Error, Result};

/// Empirical `q`-quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must be in [0, 1], got {q}"
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("quantile input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&v, q))
}

/// As [`quantile`] for already sorted, NaN-free data.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS test needs two nonempty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok((d, kolmogorov_survival((en + 0.12 + 0.11 / en) * d)))
}

/// `P(K > x)` for the Kolmogorov distribution.
fn kolmogorov_survival(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means with `⌊√len⌋` batches.
pub fn batch_means_stderr(series: &[f64]) -> f64 {
    let len = series.len();
    let batches = (len as f64).sqrt().floor().max(2.0) as usize;
    let size = len / batches;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..batches).map(|b| mean(&series[b * size..(b + 1) * size])).collect();
    (variance(&means) / batches as f64).sqrt()
}

/// Effective sample size from the initial positive sequence of
/// autocorrelation pairs.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let len = series.len();
    if len < 4 {
        return len as f64;
    }
    let m = mean(series);
    let c0: f64 = series.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / len as f64;
    if c0 == 0.0 {
        return len as f64;
    }
    let acf = |lag: usize| -> f64 {
        series[..len - lag]
            .iter()
            .zip(&series[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / len as f64
            / c0
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < len {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (len as f64 / tau.max(1.0 / len as f64)).min(len as f64)
}

/// Split-chain potential scale reduction factor.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[h..2 * h]]
        })
        .filter(|h| h.len() >= 2)
        .collect();
    if halves.len() < 2 {
        return f64::NAN;
    }
    let len = halves[0].len().min(halves.iter().map(|h| h.len()).min().unwrap_or(0)) as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let within = mean(&halves.iter().map(|h| variance(h)).collect::<Vec<_>>());
    let between = len * variance(&means);
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((len - 1.0) / len * within + between / len) / within).sqrt()
}
