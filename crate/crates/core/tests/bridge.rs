mod common;

use ndarray::{array, Array1};
use proptest::prelude::*;
use rand::Rng;

use ensemble_flow::bridge::{
    factor_row_stochastic, factored_objective, solve_chain, solve_single_step, BridgeOptions, Sinkhorn,
};
use ensemble_flow::matrix::{col_sums, row_sums, scale_rows};
use ensemble_flow::model::{Marginal, TransitionModel};
use ensemble_flow::oracle::{generic_kl_solver, OracleProblem, CERTIFICATE_TOL};
use ensemble_flow::Error;

#[test]
fn chain_matches_the_path_space_oracle() {
    let opts = BridgeOptions::default();
    let mut rng = common::rng(7);
    for _ in 0..100 {
        let n = rng.gen_range(2..=4);
        let horizon = rng.gen_range(1..=3);
        let total = rng.gen_range(1.0..20.0);
        let mu0 = common::positive_marginal(&mut rng, n, total);
        let mu_t = common::positive_marginal(&mut rng, n, total);
        let a = common::transition(&mut rng, n);
        let sol = solve_chain(&mu0, &mu_t, &a, horizon, &opts).unwrap();
        assert!(sol.residual <= 1e-9);
        let oracle = generic_kl_solver(&OracleProblem::Chain {
            mu0: mu0.clone(),
            mu_t: mu_t.clone(),
            transition: a.clone(),
            horizon,
        })
        .unwrap();
        assert!(oracle.certificate.max_violation <= CERTIFICATE_TOL);
        assert!(common::relative_gap(sol.objective, oracle.objective) <= 1e-6, "{} vs {}", sol.objective, oracle.objective);
        for (ours, theirs) in sol.marginals.iter().zip(oracle.marginals().unwrap()) {
            let diff = (ours.mass() - theirs.mass()).mapv(f64::abs).sum();
            assert!(diff <= 1e-6 * total, "{diff}");
        }
    }
}

#[test]
fn plans_chain_together() {
    let mut rng = common::rng(11);
    let mu0 = common::positive_marginal(&mut rng, 4, 10.0);
    let mu_t = common::positive_marginal(&mut rng, 4, 10.0);
    let a = common::transition(&mut rng, 4);
    let sol = solve_chain(&mu0, &mu_t, &a, 3, &BridgeOptions::default()).unwrap();
    for (t, plan) in sol.plans.iter().enumerate() {
        let rows = row_sums(&plan.flow);
        let cols = col_sums(&plan.flow);
        assert!((&rows - sol.marginals[t].mass()).mapv(f64::abs).sum() <= 1e-8);
        assert!((&cols - sol.marginals[t + 1].mass()).mapv(f64::abs).sum() <= 1e-8);
    }
    let factors = factor_row_stochastic(&sol).unwrap();
    for f in &factors {
        for s in row_sums(f) {
            assert!((s - 1.0).abs() <= 1e-10);
        }
    }
    let alt = factored_objective(&factors, &sol.marginals, &a).unwrap();
    assert!((alt - sol.objective).abs() <= 1e-8 * sol.objective.abs().max(1.0));
}

#[test]
fn infeasible_support_is_reported() {
    let a = TransitionModel::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let mu0 = Marginal::new(array![1.0, 1.0]).unwrap();
    let mu1 = Marginal::new(array![2.0, 0.0]).unwrap();
    let err = solve_single_step(&mu0, &mu1, &a, &BridgeOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)), "{err:?}");
}

fn kernel_and_marginals(seed: u64, n: usize) -> (ndarray::Array2<f64>, Array1<f64>, Array1<f64>) {
    let mut rng = common::rng(seed);
    let mu0 = common::positive_marginal(&mut rng, n, 5.0);
    let mu1 = common::positive_marginal(&mut rng, n, 5.0);
    let a = common::positive_kernel(&mut rng, n, n);
    (scale_rows(&a, mu0.mass()), mu0.into_inner(), mu1.into_inner())
}

proptest! {
    #[test]
    fn scaling_the_prior_plan_leaves_the_plan_unchanged(seed in any::<u64>(), n in 2usize..6, c in 1e-3f64..1e3) {
        let (k, r, col) = kernel_and_marginals(seed, n);
        let tol = 1e-10;
        let base = Sinkhorn::new(&k, &r, &col).tolerance(tol).solve().unwrap().plan(&k);
        let scaled_k = &k * c;
        let scaled = Sinkhorn::new(&scaled_k, &r, &col).tolerance(tol).solve().unwrap().plan(&scaled_k);
        prop_assert!(common::max_abs(&base, &scaled) <= 10.0 * tol * 5.0);
    }

    #[test]
    fn different_starts_reach_the_same_plan(seed in any::<u64>(), n in 2usize..6) {
        let (k, r, col) = kernel_and_marginals(seed, n);
        let tol = 1e-10;
        let mut rng = common::rng(seed ^ 0x5eed);
        let start: Array1<f64> = (0..n).map(|_| rng.gen_range(0.01..100.0)).collect();
        let a = Sinkhorn::new(&k, &r, &col).tolerance(tol).solve().unwrap();
        let b = Sinkhorn::new(&k, &r, &col).tolerance(tol).initial_scaling(start).solve().unwrap();
        prop_assert!(common::max_abs(&a.plan(&k), &b.plan(&k)) < 10.0 * tol * 5.0);
    }

    #[test]
    fn residual_never_increases(seed in any::<u64>(), n in 2usize..6) {
        let (k, r, col) = kernel_and_marginals(seed, n);
        let s = Sinkhorn::new(&k, &r, &col).tolerance(1e-12).solve().unwrap();
        for w in s.residual_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
