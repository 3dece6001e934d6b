use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gaen::regress::{
    fit_elastic_net, fit_elastic_net_warm, fit_min_norm_ols, fit_standardized_elastic_net, objective, soft_threshold,
    ENHyperParams, SolverOptions,
};

fn problem(seed: u64, n: usize, p: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0));
    let x = &x - &x.mean_axis(Axis(0)).unwrap();
    let y = Array1::from_shape_fn(n, |i| 2.0 * x[[i, 0]] - x[[i, 1]] + rng.random_range(-0.2..0.2) + 4.0);
    (x, y)
}

fn recording() -> SolverOptions {
    SolverOptions { record_objective: true, ..SolverOptions::default() }
}

#[test]
fn objective_is_monotone_over_sweeps() {
    for (seed, (n, p)) in [(10, 40), (40, 10), (8, 8)].into_iter().enumerate() {
        let (x, y) = problem(seed as u64, n, p);
        for h in [ENHyperParams::new(0.05, 0.5).unwrap(), ENHyperParams::lasso(0.5), ENHyperParams::ridge(0.01)] {
            let m = fit_elastic_net(x.view(), y.view(), h, &recording()).unwrap();
            assert!(m.converged);
            assert!(!m.objective_trace.is_empty());
            for w in m.objective_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "objective rose from {} to {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn stored_objective_and_selection_match_coefficients() {
    let (x, y) = problem(3, 15, 30);
    let yc = &y - y.mean().unwrap();
    let h = ENHyperParams::new(0.3, 0.7).unwrap();
    let m = fit_elastic_net(x.view(), y.view(), h, &SolverOptions::default()).unwrap();
    assert_abs_diff_eq!(m.objective_value, objective(x.view(), yc.view(), &m.coefficients, h), epsilon = 1e-9);
    let nonzero: Vec<usize> = (0..30).filter(|&j| m.coefficients[j] != 0.0).collect();
    assert_eq!(m.selected, nonzero);
    assert!(m.objective_value <= objective(x.view(), yc.view(), &[0.0; 30], h) + 1e-7);
}

#[test]
fn warm_and_cold_starts_agree() {
    let (x, y) = problem(4, 12, 25);
    let h = ENHyperParams::new(0.1, 0.5).unwrap();
    let cold = fit_elastic_net(x.view(), y.view(), h, &SolverOptions::default()).unwrap();
    let init = vec![0.3; 25];
    let warm = fit_elastic_net_warm(x.view(), y.view(), h, &SolverOptions::default(), Some(&init)).unwrap();
    for (a, b) in cold.coefficients.iter().zip(&warm.coefficients) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
    assert!(fit_elastic_net_warm(x.view(), y.view(), h, &SolverOptions::default(), Some(&[0.0; 3])).is_err());
}

#[test]
fn standardized_model_predicts_from_raw_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((20, 3), |(_, j)| 10.0 * j as f64 + rng.random_range(0.0..(j + 1) as f64));
    let y = x.column(1).mapv(|v| 3.0 * v + 1.0);
    let m = fit_standardized_elastic_net(x.view(), y.view(), ENHyperParams::ridge(1e-9), &SolverOptions::default())
        .unwrap();
    let pred = m.predict(x.view()).unwrap();
    for (p, t) in pred.iter().zip(y.iter()) {
        assert_abs_diff_eq!(p, t, epsilon = 1e-5);
    }
}

#[test]
fn lasso_keeps_true_predictors_then_empties() {
    let (x, y) = problem(6, 30, 20);
    let small = fit_elastic_net(x.view(), y.view(), ENHyperParams::lasso(0.5), &SolverOptions::default()).unwrap();
    assert!(small.selected.contains(&0) && small.selected.contains(&1));
    let big = fit_elastic_net(x.view(), y.view(), ENHyperParams::lasso(1e3), &SolverOptions::default()).unwrap();
    assert!(big.selected.is_empty());
    assert_eq!(big.predict(x.view()).unwrap()[0], big.intercept);
}

#[test]
fn min_norm_ols_is_the_smallest_interpolant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Array2::from_shape_fn((5, 9), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(5, |_| rng.random_range(-1.0..1.0));
    let m = fit_min_norm_ols(x.view(), y.view()).unwrap();
    // full row rank: the minimum-norm solution is X'(XX')^-1 y
    let xm = DMatrix::from_fn(5, 9, |i, j| x[[i, j]]);
    let w = (&xm * xm.transpose()).lu().solve(&DVector::from_fn(5, |i, _| y[i])).unwrap();
    let expected = xm.transpose() * w;
    for (a, b) in m.coefficients.iter().zip(expected.iter()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }
}

proptest! {
    #[test]
    fn soft_threshold_shrinks_towards_zero(z in -100.0f64..100.0, g in 0.0f64..50.0) {
        let s = soft_threshold(z, g);
        prop_assert!(s.abs() <= z.abs());
        prop_assert!(s == 0.0 || s.signum() == z.signum());
        prop_assert!((z - s).abs() <= g + 1e-12);
        if z.abs() <= g {
            prop_assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn fit_never_worse_than_zero(seed in 0u64..1000, alpha in 0.01f64..20.0, rho in 0.0f64..=1.0) {
        let (x, y) = problem(seed, 8, 5);
        let yc = &y - y.mean().unwrap();
        let h = ENHyperParams::new(alpha, rho).unwrap();
        let m = fit_elastic_net(x.view(), y.view(), h, &SolverOptions::default()).unwrap();
        prop_assert!(m.objective_value <= objective(x.view(), yc.view(), &[0.0; 5], h) + 1e-7);
    }
}
