//! Worked examples checked against independent oracles (quadrature, brute
//! force, direct enumeration and Monte Carlo).

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use scale_bayes_core::galerkin::GalerkinSystem;
use scale_bayes_core::linalg::DenseMatrix;
use scale_bayes_core::model::{loglik, simulate, Observation};
use scale_bayes_core::operators::{gram_matrix, smoothing_ratio, ForwardOperator, RangeCoordinate, VolterraVariant};
use scale_bayes_core::posterior::{
    conjugate_posterior, contraction_radius, mixture_posterior, series_posterior_mcmc, McmcConfig,
};
use scale_bayes_core::priors::{
    check_mixture_condition, prior_mass_curve, CoefficientDensity, GaussianPrior, Kappa, MixingLaw, MixturePrior,
    PriorSpec, SeriesPrior,
};
use scale_bayes_core::rates::fit_slope;
use scale_bayes_core::rng::stream;
use scale_bayes_core::scales::{CoefficientVector, PairIndex, SequenceScale};
use scale_bayes_core::stats::{ks_two_sample, mean, variance};
use statrs::function::erf::erf;

type Vector = CoefficientVector<f64>;

/// Composite Simpson weights on `[a, b]` with `panels` (even) panels.
fn simpson(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    (0..=panels)
        .map(|k| {
            let w = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + h * k as f64, w * h / 3.0)
        })
        .collect()
}

fn power_scale() -> SequenceScale<f64> {
    SequenceScale::power(1.0).unwrap()
}

#[test]
fn poisson_sine_matches_dirichlet_double_integration() {
    // u'' = √2 sin(2πx), u(0) = u(1) = 0, written as
    // u(x) = ∫_0^x (x − t) f(t) dt − x ∫_0^1 (1 − t) f(t) dt.
    let f = |t: f64| SQRT_2 * (2.0 * PI * t).sin();
    let inner = |x: f64| -> f64 { simpson(0.0, x, 400).iter().map(|&(t, w)| w * (x - t) * f(t)).sum() };
    let c: f64 = simpson(0.0, 1.0, 400).iter().map(|&(t, w)| w * (1.0 - t) * f(t)).sum();
    let coeff: f64 = simpson(0.0, 1.0, 400)
        .iter()
        .map(|&(x, w)| w * (inner(x) - x * c) * f(x))
        .sum();
    let op = ForwardOperator::<f64>::poisson_sine();
    let image = op.apply(&Vector::basis(2, 2)).unwrap();
    assert!((image.coord(2) - coeff).abs() < 1e-9, "{} vs {coeff}", image.coord(2));
    assert!((coeff + 1.0 / (4.0 * PI * PI)).abs() < 1e-9);
    assert_eq!(image.coord(1), 0.0);
}

/// Range basis functions of the Volterra operator pair on `[0,1]²`.
fn range_function(coord: RangeCoordinate, index: &PairIndex) -> Box<dyn Fn(f64, f64) -> f64> {
    match coord {
        RangeCoordinate::Constant => Box::new(|_, _| 1.0),
        RangeCoordinate::CosX(k) => Box::new(move |x, _| SQRT_2 * (k as f64 * PI * x).cos()),
        RangeCoordinate::CosY(l) => Box::new(move |_, y| SQRT_2 * (l as f64 * PI * y).cos()),
        RangeCoordinate::Pair(m) => {
            let (k, l) = index.pair(m);
            Box::new(move |x, y| 2.0 * (k as f64 * PI * x).cos() * (l as f64 * PI * y).cos())
        }
        RangeCoordinate::Basis(_) => unreachable!("Volterra range"),
    }
}

#[test]
fn volterra_images_match_quadrature_of_the_integral_operator() {
    let index = PairIndex::with_capacity(16);
    let a = ForwardOperator::<f64>::volterra2d(VolterraVariant::A, index.clone());
    let nodes = simpson(0.0, 1.0, 120);
    for m in 1..=6 {
        let (k, l) = index.pair(m);
        let (kf, lf) = (k as f64, l as f64);
        // ∫_0^x ∫_0^y 2 sin(kπs) sin(lπt) dt ds in closed form per factor.
        let volterra =
            |x: f64, y: f64| 2.0 * (1.0 - (kf * PI * x).cos()) / (kf * PI) * (1.0 - (lf * PI * y).cos()) / (lf * PI);
        let image = a.apply(&Vector::basis(m, m)).unwrap();
        for r in 0..image.len() {
            let basis = range_function(a.range_coordinate(r), &index);
            let coeff: f64 = nodes
                .iter()
                .flat_map(|&(x, wx)| nodes.iter().map(move |&(y, wy)| (x, y, wx * wy)))
                .map(|(x, y, w)| w * volterra(x, y) * basis(x, y))
                .sum();
            assert!(
                (image.coeffs()[r] - coeff).abs() < 1e-8,
                "pair {m} slot {r}: {} vs {coeff}",
                image.coeffs()[r]
            );
        }
    }
}

#[test]
fn volterra_a0_gram_entry_matches_quadrature() {
    let a0 = ForwardOperator::<f64>::volterra2d(VolterraVariant::A0, PairIndex::with_capacity(8));
    let nodes = simpson(0.0, 1.0, 200);
    let sq: f64 = nodes
        .iter()
        .flat_map(|&(x, wx)| nodes.iter().map(move |&(y, wy)| (x, y, wx * wy)))
        .map(|(x, y, w)| {
            let v = 2.0 * (PI * x).cos() * (PI * y).cos() / (PI * PI);
            w * v * v
        })
        .sum();
    let g = gram_matrix(&a0, 2).unwrap();
    assert!((g[(0, 0)] - sq).abs() < 1e-12);
    assert!((sq - PI.powi(-4)).abs() < 1e-12);
}

#[test]
fn dense_gram_matches_double_loop() {
    let mut rng = stream(11, &[]);
    let (rows, cols) = (9, 6);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() - 0.5).collect();
    let m = DenseMatrix::from_row_major(rows, cols, data.clone()).unwrap();
    let op = ForwardOperator::dense(m, 1.0).unwrap();
    let g = gram_matrix(&op, 5).unwrap();
    for k in 0..4 {
        for l in 0..4 {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += data[r * cols + k] * data[r * cols + l];
            }
            assert!((g[(k, l)] - acc).abs() < 1e-14);
        }
    }
}

#[test]
fn volterra_a0_is_isometric_to_the_dual_norm() {
    let scale = SequenceScale::volterra2d(512);
    let a0 = ForwardOperator::<f64>::volterra2d(VolterraVariant::A0, PairIndex::with_capacity(512));
    let mut rng = stream(3, &[]);
    let probes: Vec<Vector> = (0..100)
        .map(|_| Vector::new((0..40).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap())
        .collect();
    let (lo, hi) = smoothing_ratio(&a0, &scale, &probes).unwrap();
    assert!(lo >= 0.9 && hi <= 1.1, "({lo}, {hi})");
}

/// Least squares `min ‖M c − g‖` via modified Gram-Schmidt QR.
fn least_squares(m: &DenseMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut q: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| m[(r, c)]).collect()).collect();
    let mut r = vec![vec![0.0; cols]; cols];
    for c in 0..cols {
        for p in 0..c {
            let dot: f64 = q[p].iter().zip(&q[c]).map(|(a, b)| a * b).sum();
            r[p][c] = dot;
            let qp = q[p].clone();
            for (x, y) in q[c].iter_mut().zip(&qp) {
                *x -= dot * y;
            }
        }
        let nrm = q[c].iter().map(|x| x * x).sum::<f64>().sqrt();
        r[c][c] = nrm;
        q[c].iter_mut().for_each(|x| *x /= nrm);
    }
    let qtg: Vec<f64> = q
        .iter()
        .map(|col| col.iter().zip(g).map(|(a, b)| a * b).sum())
        .collect();
    let mut c = vec![0.0; cols];
    for i in (0..cols).rev() {
        let s: f64 = (i + 1..cols).map(|k| r[i][k] * c[k]).sum();
        c[i] = (qtg[i] - s) / r[i][i];
    }
    c
}

#[test]
fn volterra_galerkin_matches_dense_least_squares() {
    let index = PairIndex::with_capacity(64);
    for variant in [VolterraVariant::A0, VolterraVariant::A] {
        let op = ForwardOperator::<f64>::volterra2d(variant, index.clone());
        let f = Vector::from_fn(10, |m| {
            let (k, l) = index.pair(m);
            ((k * l) as f64).powi(-2)
        })
        .unwrap();
        let g = op.apply(&f).unwrap();
        let sys = GalerkinSystem::new(&op, 6).unwrap();
        let sol = sys.solve(&g).unwrap();
        // Columns A φ_k assembled at twice the data length.
        let rows = 2 * g.len();
        let mut m = DenseMatrix::zeros(rows, 5);
        for k in 1..=5 {
            let img = op.apply(&Vector::basis(k, k)).unwrap();
            for (r, &v) in img.coeffs().iter().enumerate() {
                m[(r, k - 1)] = v;
            }
        }
        let padded: Vec<f64> = (1..=rows).map(|i| g.coord(i)).collect();
        let oracle = least_squares(&m, &padded);
        for (k, (x, o)) in sol.coeffs().iter().zip(&oracle).take(5).enumerate() {
            assert!((x - o).abs() < 1e-10, "{variant:?} coord {k}");
        }
    }
}

#[test]
fn prior_galerkin_residual_is_below_the_tail_bound() {
    let prior = GaussianPrior::new(1.5, 1.0, 512, power_scale()).unwrap();
    let op = ForwardOperator::diagonal_power(1.0, 1.0).unwrap();
    let curve = scale_bayes_core::galerkin::prior_galerkin_residual_curve(&prior, &op, &[8, 32, 128], 2000, 5).unwrap();
    // Jensen: (E‖f − P_j f‖)² <= E‖f − P_j f‖² = Σ_{i>=j} sd_i², up to Monte-Carlo error.
    for (j, mean) in curve {
        let tail: f64 = (j..=512).map(|i| (i as f64).powf(-3.0)).sum();
        assert!(mean <= 1.03 * tail.sqrt(), "j = {j}: {mean} > sqrt({tail})");
        assert!(mean >= 0.7 * tail.sqrt());
    }
}

#[test]
fn zero_signal_noise_has_the_right_moments() {
    let op = ForwardOperator::diagonal_power(1.0, 1.0).unwrap();
    let n = 25.0;
    let len = 100_000;
    let obs = simulate(&op, &Vector::zeros(1), n, len, 42, 0).unwrap();
    let y = obs.y().coeffs();
    assert!(mean(y).abs() < 4.0 / (n * len as f64).sqrt());
    assert!((variance(y) * n - 1.0).abs() < 0.05);
}

/// `log N(y; μ, I/n)` summed coordinatewise.
fn gaussian_log_density(y: &[f64], mu: &[f64], n: f64) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(yi, mi)| -0.5 * (2.0 * PI / n).ln() - 0.5 * n * (yi - mi) * (yi - mi))
        .sum()
}

#[test]
fn loglik_difference_is_a_gaussian_log_ratio() {
    let mut rng = stream(8, &[]);
    let data: Vec<f64> = (0..8 * 5).map(|_| rng.random::<f64>() - 0.5).collect();
    let op = ForwardOperator::dense(DenseMatrix::from_row_major(8, 5, data).unwrap(), 1.0).unwrap();
    let f0 = Vector::new(vec![1.0, -0.5, 0.25, 0.0, 0.3]).unwrap();
    let obs = simulate(&op, &f0, 7.0, 8, 1, 0).unwrap();
    let f = Vector::new(vec![0.2, 0.1, -0.4, 0.8, 0.0]).unwrap();
    let g = Vector::new(vec![-1.0, 0.5]).unwrap();
    let lhs = loglik(&obs, &f, &op).unwrap() - loglik(&obs, &g, &op).unwrap();
    let mu = |v: &Vector| -> Vec<f64> { (1..=8).map(|i| op.apply(v).unwrap().coord(i)).collect() };
    let rhs =
        gaussian_log_density(obs.y().coeffs(), &mu(&f), 7.0) - gaussian_log_density(obs.y().coeffs(), &mu(&g), 7.0);
    assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
}

#[test]
fn series_prior_moments() {
    let prior = SeriesPrior::new(2.0, CoefficientDensity::Gaussian, Kappa::Unit, 200).unwrap();
    let mut rng = stream(1, &[]);
    let draws = 100_000;
    let zeros = (0..draws).filter(|_| prior.sample_dimension(&mut rng) == 0).count() as f64;
    let p = (-2.0f64).exp();
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((zeros / draws as f64 - p).abs() < 3.0 * se);
}

#[test]
fn gaussian_prior_coordinate_moments() {
    let prior = GaussianPrior::new(1.5, 1.0, 4, power_scale()).unwrap();
    let mut rng = stream(2, &[]);
    let draws: Vec<Vector> = (0..100_000).map(|_| prior.sample(&mut rng)).collect();
    let c4: Vec<f64> = draws.iter().map(|d| d.coord(4)).collect();
    assert!((variance(&c4).sqrt() / 0.125 - 1.0).abs() < 0.05);
    let c1: Vec<f64> = draws.iter().map(|d| d.coord(1)).collect();
    let c2: Vec<f64> = draws.iter().map(|d| d.coord(2)).collect();
    let (m1, m2) = (mean(&c1), mean(&c2));
    let cov = c1.iter().zip(&c2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / c1.len() as f64;
    let corr = cov / (variance(&c1) * variance(&c2)).sqrt();
    assert!(corr.abs() < 4.0 / (c1.len() as f64).sqrt());
}

#[test]
fn series_coefficient_density_integrates_to_one() {
    for density in [CoefficientDensity::Gaussian, CoefficientDensity::Laplace] {
        let prior = SeriesPrior::new(5.0, density, Kappa::Power { exponent: 0.5 }, 10).unwrap();
        let lpm = prior.log_pm(1);
        let total: f64 = simpson(-60.0, 60.0, 240_000)
            .iter()
            .map(|&(x, w)| w * (prior.log_density(&Vector::new(vec![x]).unwrap(), 1).unwrap() - lpm).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{density:?}: {total}");
    }
}

#[test]
fn prior_mass_trivial_cases() {
    let op = ForwardOperator::diagonal_power(1.0, 1.0).unwrap();
    let gauss = PriorSpec::Gaussian(GaussianPrior::new(1.5, 1.0, 100, power_scale()).unwrap());
    let pts = prior_mass_curve(&gauss, &op, &Vector::zeros(1), &[1e9], 1000, 1).unwrap();
    assert_eq!(pts[0].neg_log_p, Some(0.0));
    let f0 = Vector::zeros(100);
    let point = PriorSpec::Gaussian(GaussianPrior::new(1.5, 0.0, 100, power_scale()).unwrap());
    for p in prior_mass_curve(&point, &op, &f0, &[1e-6, 0.1, 1.0], 1000, 1).unwrap() {
        assert_eq!(p.neg_log_p, Some(0.0));
    }
}

#[test]
fn prior_mass_agrees_with_chi_square_resampling() {
    let truncation = 400;
    let prior = GaussianPrior::new(1.5, 1.0, truncation, power_scale()).unwrap();
    let op = ForwardOperator::diagonal_power(1.0, 1.0).unwrap();
    let eps = [0.3, 0.5];
    let draws = 200_000;
    let mc = prior_mass_curve(&PriorSpec::Gaussian(prior), &op, &Vector::zeros(1), &eps, draws, 4).unwrap();
    // ‖Af‖² = Σ a_i² sd_i² χ²_i with a_i² sd_i² = i^{-5}.
    let weights: Vec<f64> = (1..=truncation).map(|i| (i as f64).powf(-5.0)).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let sq: Vec<f64> = (0..draws)
        .map(|_| {
            weights
                .iter()
                .map(|w| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w * z * z
                })
                .sum()
        })
        .collect();
    for (p, e) in mc.iter().zip(eps) {
        let q = sq.iter().filter(|&&s| s < e * e).count() as f64 / draws as f64;
        let p_mc = (-p.neg_log_p.unwrap()).exp();
        let se = (p_mc * (1.0 - p_mc) / draws as f64 + q * (1.0 - q) / draws as f64).sqrt();
        assert!((p_mc - q).abs() < 3.0 * se, "eps {e}: {p_mc} vs {q}");
    }
}

#[test]
fn inverse_gamma_mixing_law_satisfies_the_tail_condition() {
    let law = MixingLaw::inv_gamma_sq(1.0, 1.0).unwrap();
    let small: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
    let large: Vec<f64> = [2.0, 5.0, 10.0, 50.0, 100.0, 1000.0].to_vec();
    let report = check_mixture_condition(&law, 1.0, 1.0, &small, &large).unwrap();
    assert!(report.full_support && report.satisfied);
    assert!(report.small_t_ratio <= 50.0, "{}", report.small_t_ratio);
    assert!(
        report.large_t_ratio.is_finite() && report.large_t_ratio < 10.0,
        "{}",
        report.large_t_ratio
    );
    let degenerate = check_mixture_condition(&MixingLaw::PointMass(1.0), 1.0, 1.0, &small, &large).unwrap();
    assert!(!degenerate.satisfied);
}

#[test]
fn point_mass_mixture_samples_like_the_gaussian_prior() {
    let tau = 0.7;
    let mix = MixturePrior::new(1.5, MixingLaw::PointMass(tau), 3, power_scale()).unwrap();
    let gauss = GaussianPrior::new(1.5, tau, 3, power_scale()).unwrap();
    let mut r1 = stream(1, &[]);
    let mut r2 = stream(2, &[]);
    let a: Vec<f64> = (0..5000).map(|_| mix.sample(&mut r1).1.coord(1)).collect();
    let b: Vec<f64> = (0..5000).map(|_| gauss.sample(&mut r2).coord(1)).collect();
    let (_, p) = ks_two_sample(&a, &b).unwrap();
    assert!(p > 0.01, "p = {p}");
}

fn one_coordinate(a: f64, sd: f64, n: f64, y: f64) -> (ForwardOperator<f64>, GaussianPrior<f64>, Observation<f64>) {
    let op = ForwardOperator::diagonal(vec![a], 1.0).unwrap();
    let prior = GaussianPrior::new(1.0, sd, 1, power_scale()).unwrap();
    let obs = Observation::new(Vector::new(vec![y]).unwrap(), n, 0, 0, "one").unwrap();
    (op, prior, obs)
}

#[test]
fn conjugate_posterior_matches_grid_integration() {
    let (a, sd, n, y) = (0.5, 2.0, 3.0, 1.2);
    let (op, prior, obs) = one_coordinate(a, sd, n, y);
    let post = conjugate_posterior(&obs, &op, &prior).unwrap();
    let nodes = simpson(-40.0, 40.0, 200_000);
    let dens: Vec<(f64, f64)> = nodes
        .iter()
        .map(|&(f, w)| {
            (
                f,
                w * (n * a * f * y - 0.5 * n * a * a * f * f - 0.5 * f * f / (sd * sd)).exp(),
            )
        })
        .collect();
    let z: f64 = dens.iter().map(|d| d.1).sum();
    let m: f64 = dens.iter().map(|d| d.0 * d.1).sum::<f64>() / z;
    let v: f64 = dens.iter().map(|d| (d.0 - m) * (d.0 - m) * d.1).sum::<f64>() / z;
    assert!((post.means[0] - m).abs() < 1e-6);
    assert!((post.variances[0] - v).abs() < 1e-6);
}

fn normal_pdf(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[test]
fn two_point_grid_matches_two_term_bayes() {
    let (a, n, y) = (0.8, 4.0, 0.9);
    let op = ForwardOperator::diagonal(vec![a], 1.0).unwrap();
    let law = MixingLaw::inv_gamma_sq(1.0, 1.0).unwrap();
    let mix = MixturePrior::new(1.0, law.clone(), 1, power_scale()).unwrap();
    let obs = Observation::new(Vector::new(vec![y]).unwrap(), n, 0, 0, "one").unwrap();
    let taus = [0.5, 2.0];
    let post = mixture_posterior(&obs, &op, &mix, Some(&taus)).unwrap();
    // Both trapezoid cells have width 0.75, so only the densities matter.
    let q = |t: f64| 2.0 * t.powi(-3) * (-t.powi(-2)).exp();
    let joint: Vec<f64> = taus
        .iter()
        .map(|&t| q(t) * normal_pdf(y, a * a * t * t + 1.0 / n))
        .collect();
    let total: f64 = joint.iter().sum();
    let weights = post.tau_weights.clone().unwrap();
    for (k, &(t, w)) in weights.iter().enumerate() {
        assert_eq!(t, taus[k]);
        assert!((w - joint[k] / total).abs() < 1e-12);
    }
    let point = MixturePrior::new(1.0, MixingLaw::PointMass(0.5), 1, power_scale()).unwrap();
    let exact = conjugate_posterior(&obs, &op, &point.component(0.5).unwrap()).unwrap();
    let degenerate = mixture_posterior(&obs, &op, &point, None).unwrap();
    assert_eq!(degenerate.means, exact.means);
    assert_eq!(degenerate.variances, exact.variances);
}

#[test]
fn median_radius_of_one_gaussian_coordinate() {
    let (op, prior, obs) = one_coordinate(1.0, 1.0, 3.0, 0.4);
    let post = conjugate_posterior(&obs, &op, &prior).unwrap();
    let sigma = post.variances[0].sqrt();
    let f0 = Vector::new(vec![post.means[0]]).unwrap();
    // P(|Z| <= z) = erf(z/√2) = 1/2 by bisection.
    let (mut lo, mut hi) = (0.0, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if erf(mid / SQRT_2) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r50 = contraction_radius(&post, &f0, 0.5, 17).unwrap();
    assert!((r50 / (lo * sigma) - 1.0).abs() < 0.03, "{r50} vs {}", lo * sigma);
    assert!(contraction_radius(&post, &f0, 0.9, 17).unwrap() >= r50);
}

#[test]
fn conjugate_mean_is_a_stationary_point_of_the_log_posterior() {
    let op = ForwardOperator::diagonal_power(1.0, 1.0).unwrap();
    let prior = GaussianPrior::new(1.5, 1.0, 6, power_scale()).unwrap();
    let f0 = Vector::from_fn(6, |i| (i as f64).powf(-1.6)).unwrap();
    let obs = simulate(&op, &f0, 200.0, 6, 3, 0).unwrap();
    let post = conjugate_posterior(&obs, &op, &prior).unwrap();
    let log_post = |f: &Vector| -> f64 {
        let prior_term: f64 = (1..=6).map(|i| -0.5 * (f.coord(i) / prior.sd(i)).powi(2)).sum();
        loglik(&obs, f, &op).unwrap() + prior_term
    };
    let h = 1e-5;
    for i in 1..=6 {
        let up = post.mean_vector().add(&Vector::basis(i, 6).scaled(h));
        let down = post.mean_vector().sub(&Vector::basis(i, 6).scaled(h));
        let grad = (log_post(&up) - log_post(&down)) / (2.0 * h);
        assert!(grad.abs() < 1e-6, "coord {i}: {grad}");
    }
}

#[test]
fn radius_shrinks_with_n_on_shared_noise() {
    let op = ForwardOperator::diagonal_power(1.0, 1.0).unwrap();
    let prior = GaussianPrior::new(1.5, 1.0, 200, power_scale()).unwrap();
    let f0 = Vector::from_fn(2000, |i| (i as f64).powf(-1.55)).unwrap();
    let mut last = f64::INFINITY;
    for n in [1e2, 1e3, 1e4, 1e5, 1e6] {
        let obs = simulate(&op, &f0, n, 800, 5, 0).unwrap();
        let post = conjugate_posterior(&obs, &op, &prior).unwrap();
        let r = contraction_radius(&post, &f0, 0.5, 9).unwrap();
        assert!(r <= 1.1 * last, "n = {n}: {r} > {last}");
        last = r;
    }
}

/// Exact posterior means of the series prior with Gaussian coefficients and a
/// diagonal operator, by enumerating `M`.
fn enumerated_series_means(prior: &SeriesPrior<f64>, a: &[f64], y: &[f64], n: f64) -> Vec<f64> {
    let m_max = prior.m_max;
    let mut log_ev = Vec::new();
    for m in 0..=m_max {
        // Coordinate i <= m: y_i ~ N(0, a_i² κ_i² + 1/n); otherwise N(0, 1/n).
        let mut l = prior.log_pm(m);
        for i in 0..y.len() {
            let var = if i < m { a[i] * a[i] + 1.0 / n } else { 1.0 / n };
            l += normal_pdf(y[i], var).ln();
        }
        log_ev.push(l);
    }
    let top = log_ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_ev.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    (0..m_max)
        .map(|i| {
            let cond = n * a[i] * y[i] / (n * a[i] * a[i] + 1.0);
            (i + 1..=m_max).map(|m| w[m] / total).sum::<f64>() * cond
        })
        .collect()
}

#[test]
fn two_dimensional_series_chain_matches_enumeration() {
    let a = [1.0, 0.6];
    let n = 6.0;
    let op = ForwardOperator::diagonal(a.to_vec(), 1.0).unwrap();
    let obs = Observation::new(Vector::new(vec![0.8, -0.5]).unwrap(), n, 0, 0, "two").unwrap();
    let prior = SeriesPrior::new(1.5, CoefficientDensity::Gaussian, Kappa::Unit, 2).unwrap();
    let cfg = McmcConfig {
        n_iter: 20_000,
        chains: 4,
        seed: 21,
        ..McmcConfig::default()
    };
    let post = series_posterior_mcmc(&obs, &op, &prior, &cfg).unwrap();
    let exact = enumerated_series_means(&prior, &a, obs.y().coeffs(), n);
    let se = &post.diagnostics.as_ref().unwrap().mean_stderr;
    for i in 0..2 {
        assert!(
            (post.means[i] - exact[i]).abs() < 3.0 * se[i],
            "coord {i}: {} vs {}",
            post.means[i],
            exact[i]
        );
    }
}

#[test]
fn laplace_series_chain_matches_quadrature() {
    let a = [1.0, 0.5];
    let n = 5.0;
    let y = [0.7, 0.4];
    let op = ForwardOperator::diagonal(a.to_vec(), 1.0).unwrap();
    let obs = Observation::new(Vector::new(y.to_vec()).unwrap(), n, 0, 0, "two").unwrap();
    let prior = SeriesPrior::new(1.0, CoefficientDensity::Laplace, Kappa::Unit, 2).unwrap();
    // Unnormalized posterior over (M, f_1..f_M), integrated on a grid.
    let lik = |f: &[f64]| -> f64 {
        f.iter()
            .enumerate()
            .map(|(i, x)| n * a[i] * x * y[i] - 0.5 * n * a[i] * a[i] * x * x)
            .sum::<f64>()
    };
    let lap = |x: f64| 0.5 * (-x.abs()).exp();
    let nodes = simpson(-8.0, 8.0, 1600);
    let z0 = prior.log_pm(0).exp();
    let (mut z1, mut m1) = (0.0, 0.0);
    for &(x, w) in &nodes {
        let p = w * lap(x) * lik(&[x]).exp();
        z1 += p;
        m1 += p * x;
    }
    let (mut z2, mut m21, mut m22) = (0.0, 0.0, 0.0);
    for &(x, wx) in &nodes {
        for &(u, wu) in &nodes {
            let p = wx * wu * lap(x) * lap(u) * lik(&[x, u]).exp();
            z2 += p;
            m21 += p * x;
            m22 += p * u;
        }
    }
    let (p1, p2) = (prior.log_pm(1).exp(), prior.log_pm(2).exp());
    let total = z0 + p1 * z1 + p2 * z2;
    let exact = [(p1 * m1 + p2 * m21) / total, p2 * m22 / total];
    let cfg = McmcConfig {
        n_iter: 20_000,
        chains: 4,
        seed: 5,
        ..McmcConfig::default()
    };
    let post = series_posterior_mcmc(&obs, &op, &prior, &cfg).unwrap();
    let se = &post.diagnostics.as_ref().unwrap().mean_stderr;
    for i in 0..2 {
        assert!(
            (post.means[i] - exact[i]).abs() < 3.0 * se[i],
            "coord {i}: {} vs {}",
            post.means[i],
            exact[i]
        );
    }
}

#[test]
fn extra_observed_coordinates_do_not_change_the_chain() {
    let op = ForwardOperator::diagonal_power(1.0, 1.0).unwrap();
    let f0 = Vector::new(vec![1.0, 0.5, 0.2]).unwrap();
    let prior = SeriesPrior::new(3.0, CoefficientDensity::Gaussian, Kappa::Unit, 10).unwrap();
    let cfg = McmcConfig {
        n_iter: 300,
        chains: 2,
        ..McmcConfig::default()
    };
    let short = simulate(&op, &f0, 100.0, 20, 2, 0).unwrap();
    let long = simulate(&op, &f0, 100.0, 70, 2, 0).unwrap();
    let a = series_posterior_mcmc(&short, &op, &prior, &cfg).unwrap();
    let b = series_posterior_mcmc(&long, &op, &prior, &cfg).unwrap();
    for (x, y) in a.means.iter().zip(&b.means) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn noisy_power_law_slope() {
    let mut rng = stream(4, &[]);
    let pts: Vec<(f64, f64)> = (0..12)
        .map(|k| {
            let n = 10f64.powf(2.0 + 0.5 * k as f64);
            let noise: f64 = StandardNormal.sample(&mut rng);
            (n, 3.0 * n.powf(-0.3) * (1.0 + 0.01 * noise))
        })
        .collect();
    let fit = fit_slope(&pts).unwrap();
    assert!((-0.33..=-0.27).contains(&fit.slope), "{}", fit.slope);
}
