use debiasot::costs::{constructive_inf_rep, debias, eval_inf_rep, is_debiasable, CostMatrix, InfRepresentation};
use debiasot::decomposition::barycenter_decompose;
use debiasot::divergences::{mmd_squared, sinkhorn_divergence};
use debiasot::kernels::lse_cost;
use debiasot::measures::{kl_divergence, DiscreteMeasure};
use debiasot::solvers::{sinkhorn, DEFAULT_MAX_ITER};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = DiscreteMeasure<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        DiscreteMeasure::new(Array1::from_iter(w.iter().map(|v| v / s))).unwrap()
    })
}

fn table(rows: usize, cols: usize) -> impl Strategy<Value = InfRepresentation<f64>> {
    prop::collection::vec(0.0f64..2.0, rows * cols)
        .prop_map(move |v| InfRepresentation::new(Array2::from_shape_vec((rows, cols), v).unwrap()).unwrap())
}

fn points(n: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.0f64..1.0, n * d).prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
}

fn sized<S: Strategy, F: Fn(usize) -> S>(lo: usize, hi: usize, f: F) -> impl Strategy<Value = S::Value> {
    (lo..=hi).prop_flat_map(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn debias_zeroes_the_diagonal_and_is_idempotent(
        c in sized(2, 6, |n| prop::collection::vec(0.0f64..5.0, n * n).prop_map(move |v| Array2::from_shape_vec((n, n), v).unwrap()))
    ) {
        let c = CostMatrix::new(&c + &c.t()).unwrap();
        let c0 = debias(&c).unwrap();
        for i in 0..c.rows() {
            prop_assert!(c0.get(i, i).abs() < 1e-12);
        }
        let c00 = debias(&c0).unwrap();
        for (a, b) in c0.entries().iter().zip(c00.entries()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inf_rep_costs_are_debiasable_and_roundtrip(psi in sized(2, 6, |n| sized(1, 8, move |m| table(n, m)))) {
        let c = eval_inf_rep(&psi);
        prop_assert!(is_debiasable(&c, false, &1e-12).unwrap().verdict);
        let back = eval_inf_rep(&constructive_inf_rep(&c).unwrap());
        for (a, b) in back.entries().iter().zip(c.entries()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn lse_cost_is_debiasable_and_above_inf_rep(
        (psi, lambda) in sized(2, 5, |n| sized(1, 8, move |m| (table(n, m), weights(m)))),
        eps in 0.1f64..3.0,
    ) {
        let lse = lse_cost(&psi, lambda.weights().as_slice().unwrap(), eps).unwrap();
        prop_assert!(is_debiasable(&lse, false, &1e-10).unwrap().verdict);
        let inf = eval_inf_rep(&psi);
        for (a, b) in inf.entries().iter().zip(lse.entries()) {
            prop_assert!(a - b <= 1e-12);
        }
    }

    #[test]
    fn sinkhorn_meets_marginals_and_closes_the_gap(
        (x, mu, nu) in sized(2, 6, |n| (points(n, 2), weights(n), weights(n))),
        eps in 0.05f64..2.0,
    ) {
        let c = CostMatrix::squared_euclidean(x.view()).unwrap();
        let s = sinkhorn(&c, &mu, &nu, eps, 1e-12, DEFAULT_MAX_ITER).unwrap();
        prop_assert!(s.marginal_error <= 1e-12);
        prop_assert!(s.duality_gap().abs() <= 1e-9 * (1.0 + s.primal_value.abs()));
        let rows = s.plan.sum_axis(ndarray::Axis(1));
        for (r, w) in rows.iter().zip(mu.weights()) {
            prop_assert!((r - w).abs() <= 1e-11);
        }
    }

    #[test]
    fn divergence_is_symmetric_and_nonnegative_for_squared_distance(
        (x, mu, nu) in sized(2, 6, |n| (points(n, 2), weights(n), weights(n))),
        eps in 0.1f64..2.0,
    ) {
        let c = CostMatrix::squared_euclidean(x.view()).unwrap();
        let a = sinkhorn_divergence(&c, &mu, &nu, eps, 1e-12).unwrap();
        let b = sinkhorn_divergence(&c, &nu, &mu, eps, 1e-12).unwrap();
        prop_assert!(a.debiased >= -1e-9);
        prop_assert!((a.debiased - b.debiased).abs() <= 1e-9);
        let same = sinkhorn_divergence(&c, &mu, &mu, eps, 1e-12).unwrap();
        prop_assert!(same.debiased.abs() <= 1e-9);
    }

    #[test]
    fn mmd_of_squared_distance_is_nonnegative(
        (x, mu, nu) in sized(2, 8, |n| (points(n, 3), weights(n), weights(n))),
    ) {
        let c = CostMatrix::squared_euclidean(x.view()).unwrap();
        prop_assert!(mmd_squared(&c, &mu, &nu).unwrap().debiased >= -1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_vanishes_on_the_diagonal((a, b) in sized(1, 8, |n| (weights(n), weights(n)))) {
        prop_assert!(kl_divergence(&a, &b).unwrap() >= -1e-15);
        prop_assert!(kl_divergence(&a, &a).unwrap().abs() <= 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn barycenter_descends_and_matches_the_direct_value(
        (psi, lambda, mu, nu) in sized(2, 4, |n| sized(2, 8, move |m| (table(n, m), weights(m), weights(n), weights(n)))),
        eps in 0.3f64..2.0,
    ) {
        let sol = barycenter_decompose(&psi, &lambda, &mu, &nu, eps, 1e-10, 20_000).unwrap();
        for w in sol.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(sol.identity_gap() <= 1e-6);
        prop_assert!(sol.direct_value <= sol.value + 1e-10);
        prop_assert!((sol.eta.total_mass() - 1.0).abs() <= 1e-12);
    }
}
