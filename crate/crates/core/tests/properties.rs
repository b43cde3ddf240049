use proptest::prelude::*;
use scale_bayes_core::galerkin::{modified_galerkin_solve_with, GalerkinSystem};
use scale_bayes_core::operators::{gram_matrix, ForwardOperator, VolterraVariant};
use scale_bayes_core::posterior::{conjugate_posterior, contraction_radii, mixture_posterior};
use scale_bayes_core::priors::{GaussianPrior, MixingLaw, MixturePrior};
use scale_bayes_core::rates::{theoretical_exponent, PriorKind, RateQuery};
use scale_bayes_core::scales::{
    approx_number, dual_maximizer, dual_norm, norm, project, CoefficientVector, PairIndex, SequenceScale,
};

type Vector = CoefficientVector<f64>;

fn vector(max_len: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-10.0f64..10.0, 1..max_len).prop_map(|v| Vector::new(v).unwrap())
}

fn scale() -> impl Strategy<Value = SequenceScale<f64>> {
    prop_oneof![
        (0.5f64..3.0).prop_map(|d| SequenceScale::power(d).unwrap()),
        Just(SequenceScale::volterra2d(256)),
    ]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn norms_are_monotone_in_the_order(f in vector(40), sc in scale(), s in -2.0f64..2.0, dt in 0.0f64..2.0) {
        prop_assert!(norm(&f, s, &sc).unwrap() <= norm(&f, s + dt, &sc).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn interpolation_inequality(f in vector(40), sc in scale(), r in -2.0f64..0.0, gap1 in 0.01f64..2.0, gap2 in 0.01f64..2.0) {
        let s = r + gap1;
        let t = s + gap2;
        let lambda = (t - s) / (t - r);
        let lhs = norm(&f, s, &sc).unwrap();
        let rhs = norm(&f, r, &sc).unwrap().powf(lambda) * norm(&f, t, &sc).unwrap().powf(1.0 - lambda);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn jackson_and_bernstein(f in vector(60), sc in scale(), j in 1usize..70, s in 0.0f64..3.0, t in -2i32..=2) {
        let t = f64::from(t);
        prop_assume!(s >= t);
        let tail = f.sub(&project(&f, j));
        let head = project(&f, j);
        let delta = approx_number(j, s - t, &sc);
        prop_assert!(norm(&tail, t, &sc).unwrap() <= delta * norm(&f, s, &sc).unwrap() * (1.0 + 1e-12) + 1e-300);
        prop_assert!(norm(&head, s, &sc).unwrap() * delta <= norm(&head, t, &sc).unwrap() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn dual_norm_attained_at_the_maximizer(f in vector(40), sc in scale(), s in 0.0f64..3.0) {
        let g = dual_maximizer(&f, s, &sc).unwrap();
        let dn = dual_norm(&f, s, &sc).unwrap();
        prop_assert!(close(f.dot(&g), dn, 1e-10));
        if dn > 0.0 {
            prop_assert!(close(norm(&g, s, &sc).unwrap(), 1.0, 1e-10));
        }
    }

    #[test]
    fn projection_is_idempotent(f in vector(40), j in 1usize..50) {
        prop_assert_eq!(project(&project(&f, j), j), project(&f, j));
    }

    #[test]
    fn operators_are_linear(f in vector(30), g in vector(30), a in -3.0f64..3.0, b in -3.0f64..3.0, which in 0usize..4) {
        let op = match which {
            0 => ForwardOperator::diagonal_power(1.3, 1.3).unwrap(),
            1 => ForwardOperator::poisson_sine(),
            2 => ForwardOperator::volterra2d(VolterraVariant::A, PairIndex::with_capacity(64)),
            _ => ForwardOperator::volterra2d(VolterraVariant::A0, PairIndex::with_capacity(64)),
        };
        let lhs = op.apply(&f.lincomb(a, &g, b)).unwrap();
        let rhs = op.apply(&f).unwrap().lincomb(a, &op.apply(&g).unwrap(), b);
        prop_assert!(lhs.sub(&rhs).l2() <= 1e-12 * (1.0 + rhs.l2()));
    }

    #[test]
    fn volterra_pair_differs_only_on_boundary_slots(f in vector(30)) {
        let idx = PairIndex::with_capacity(64);
        let a = ForwardOperator::volterra2d(VolterraVariant::A, idx.clone());
        let a0 = ForwardOperator::volterra2d(VolterraVariant::A0, idx);
        let diff = a.apply(&f).unwrap().sub(&a0.apply(&f).unwrap());
        for (r, v) in diff.coeffs().iter().enumerate() {
            if !a.is_boundary_slot(r) {
                prop_assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn gram_equals_assembled_columns(j in 2usize..20) {
        let op = ForwardOperator::volterra2d(VolterraVariant::A, PairIndex::with_capacity(64));
        let g = gram_matrix(&op, j).unwrap();
        let cols: Vec<Vector> = (1..j).map(|k| op.apply(&Vector::basis(k, k)).unwrap()).collect();
        for k in 0..j - 1 {
            for l in 0..j - 1 {
                let len = cols[k].len().max(cols[l].len());
                prop_assert!(close(g[(k, l)], cols[k].resized(len).dot(&cols[l].resized(len)), 1e-14));
            }
        }
    }

    #[test]
    fn galerkin_orthogonality_and_idempotence(g in vector(80), j in 2usize..25, which in 0usize..3) {
        let op = match which {
            0 => ForwardOperator::diagonal_power(1.0, 1.0).unwrap(),
            1 => ForwardOperator::volterra2d(VolterraVariant::A, PairIndex::with_capacity(64)),
            _ => ForwardOperator::volterra2d(VolterraVariant::A0, PairIndex::with_capacity(64)),
        };
        let sys = GalerkinSystem::new(&op, j).unwrap();
        let sol = sys.solve(&g).unwrap();
        prop_assert!(sys.orthogonality_residual(&g, &sol).unwrap() <= 1e-8 * (1.0 + g.l2()));
        let again = sys.solve(&op.apply(&sol).unwrap()).unwrap();
        prop_assert!(again.sub(&sol).l2() <= 1e-10 * (1.0 + sol.l2()));
        prop_assert!(sys.factorization_error() < 1e-10);
    }

    #[test]
    fn modified_galerkin_agrees_across_the_pair(f in vector(12), j in 2usize..15) {
        let idx = PairIndex::with_capacity(64);
        let a = ForwardOperator::volterra2d(VolterraVariant::A, idx.clone());
        let a0 = ForwardOperator::volterra2d(VolterraVariant::A0, idx);
        let sys0 = GalerkinSystem::new(&a0, j).unwrap();
        let from_a = modified_galerkin_solve_with(&sys0, &a, &a.apply(&f).unwrap()).unwrap();
        let from_a0 = sys0.solve(&a0.apply(&f).unwrap()).unwrap();
        prop_assert!(from_a.sub(&from_a0).l2() <= 1e-10 * (1.0 + f.l2()));
    }

    #[test]
    fn posterior_summaries_are_well_formed(y in vector(30), n in 1.0f64..1e6) {
        let op = ForwardOperator::diagonal_power(1.0, 1.0).unwrap();
        let obs = scale_bayes_core::model::Observation::new(y.clone(), n, 0, 0, "p").unwrap();
        let sc = SequenceScale::power(1.0).unwrap();
        let prior = GaussianPrior::new(1.5, 1.0, y.len(), sc.clone()).unwrap();
        let post = conjugate_posterior(&obs, &op, &prior).unwrap();
        prop_assert!(post.variances.iter().all(|&v| v >= 0.0));
        let mix = MixturePrior::new(1.5, MixingLaw::inv_gamma_sq(1.0, 1.0).unwrap(), y.len(), sc).unwrap();
        let grid = [0.5, 2.0];
        let mp = mixture_posterior(&obs, &op, &mix, Some(&grid)).unwrap();
        let total: f64 = mp.tau_weights.unwrap().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(mp.variances.iter().all(|&v| v >= 0.0));
        let r = contraction_radii(&post, &y, &[0.5, 0.9], 1).unwrap();
        prop_assert!(r[1] >= r[0]);
    }

    #[test]
    fn mixture_exponent_dominates_gaussian(alpha in 0.6f64..5.0, frac in 0.01f64..1.0, gamma in 0.1f64..3.0, d in 0.5f64..1.2) {
        prop_assume!(alpha > d / 2.0);
        let beta = frac * alpha;
        let q = |prior| RateQuery { prior, alpha: Some(alpha), beta, gamma, d };
        let mix = theoretical_exponent(&q(PriorKind::Mixture)).unwrap();
        let gauss = theoretical_exponent(&q(PriorKind::Gaussian)).unwrap();
        prop_assert!(mix >= gauss - 1e-15);
    }

    #[test]
    fn exponent_monotonicity(beta in 0.1f64..4.0, gamma in 0.1f64..3.0, d in 0.5f64..3.0, step in 0.01f64..1.0) {
        let e = |beta, gamma, d| theoretical_exponent(&RateQuery { prior: PriorKind::Series, alpha: None, beta, gamma, d }).unwrap();
        prop_assert!(e(beta + step, gamma, d) > e(beta, gamma, d));
        prop_assert!(e(beta, gamma + step, d) < e(beta, gamma, d));
        prop_assert!(e(beta, gamma, d + step) < e(beta, gamma, d));
    }
}

#[test]
fn rj_a_is_uniformly_bounded() {
    use rand_distr::{Distribution, StandardNormal};
    let op = ForwardOperator::volterra2d(VolterraVariant::A, PairIndex::with_capacity(256));
    let mut rng = scale_bayes_core::rng::stream(2, &[]);
    let probes: Vec<Vector> = (0..50)
        .map(|_| {
            let v = Vector::new((0..60).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
            v.scaled(1.0 / v.l2())
        })
        .collect();
    let norm_at = |j: usize| -> f64 {
        let sys = GalerkinSystem::new(&op, j).unwrap();
        probes
            .iter()
            .map(|f| sys.solve(&op.apply(f).unwrap()).unwrap().l2())
            .fold(0.0, f64::max)
    };
    let base = norm_at(2);
    for j in [4, 8, 16, 32, 60] {
        assert!(norm_at(j) <= 10.0 * base, "j = {j}");
    }
}
