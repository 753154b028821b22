mod common;

use ndarray::{Array1, Array2};
use rand::Rng;

use ensemble_flow::bridge::{solve_single_step, BridgeOptions};
use ensemble_flow::estimator::{estimate_flow, estimate_flow_multi, EstimatorOptions, FlowEstimate, Stabilization};
use ensemble_flow::matrix::{col_sums, matrix_power, row_sums};
use ensemble_flow::model::{forward_propagate, Marginal, ObservationModel, ProblemInstance};
use ensemble_flow::oracle::{brute_force_ml_plan, generic_kl_solver, OracleProblem};
use ensemble_flow::simulate::{build_binned_observation, build_gaussian_chain, simulate};

fn l1(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    (a - b).mapv(f64::abs).sum()
}

/// Every constraint family recomputed from the returned plans.
fn constraint_violation(est: &FlowEstimate, inst: &ProblemInstance) -> f64 {
    let n_mass = inst.total_mass();
    let mut worst: f64 = 0.0;
    let mut prev = inst.prior.mass().clone();
    for (t, plan) in est.transfer_plans.iter().enumerate() {
        let mu = est.marginals[t].mass();
        worst = worst.max(l1(&row_sums(&plan.flow), &prev)).max(l1(&col_sums(&plan.flow), mu));
        for (s, d) in est.observation_plans[t].iter().enumerate() {
            worst = worst
                .max(l1(&row_sums(&d.assignment), mu))
                .max(l1(&col_sums(&d.assignment), inst.counts(t + 1, s)));
        }
        prev = mu.clone();
    }
    worst / n_mass
}

fn trace_is_monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0))
}

#[test]
fn random_instances_match_the_oracle() {
    let mut rng = common::rng(2024);
    for k in 0..40 {
        let sensors = 1 + k % 2;
        let (n, m, horizon) = (rng.gen_range(2..=4), rng.gen_range(2..=3), rng.gen_range(1..=3));
        let inst = common::hmm_instance(&mut rng, n, m, horizon, sensors);
        let opts = EstimatorOptions::default();
        let est = if sensors == 1 {
            estimate_flow(&inst, &opts).unwrap()
        } else {
            estimate_flow_multi(&inst, &opts).unwrap()
        };
        let oracle = generic_kl_solver(&OracleProblem::Hmm(inst.clone())).unwrap();
        assert!(
            common::relative_gap(est.objective, oracle.objective) <= 1e-6,
            "instance {k}: {} vs {}",
            est.objective,
            oracle.objective
        );
        assert!(est.residual <= 1e-8);
        assert!(constraint_violation(&est, &inst) <= 1e-8);
        assert!(trace_is_monotone(&est.dual_objective_trace), "{:?}", est.dual_objective_trace);
    }
}

#[test]
fn duplicated_sensor_matches_the_oracle_with_equal_plans() {
    let mut rng = common::rng(5);
    for _ in 0..5 {
        let single = common::hmm_instance(&mut rng, 3, 2, 2, 1);
        let counts: Vec<Vec<Array1<f64>>> = (1..=single.horizon)
            .map(|t| vec![single.counts(t, 0).clone(), single.counts(t, 0).clone()])
            .collect();
        let b = single.sensors[0].clone();
        let double = ProblemInstance::new(single.prior.clone(), single.transition.clone(), vec![b.clone(), b], counts);
        let two = estimate_flow_multi(&double, &EstimatorOptions::default()).unwrap();
        let oracle = generic_kl_solver(&OracleProblem::Hmm(double.clone())).unwrap();
        let reference = oracle.marginals().unwrap();
        for t in 0..single.horizon {
            assert!(l1(two.marginals[t].mass(), reference[t + 1].mass()) <= 1e-6 * single.total_mass());
            let d = &two.observation_plans[t];
            assert!(common::max_abs(&d[0].assignment, &d[1].assignment) <= 1e-8 * single.total_mass());
        }
        assert!(common::relative_gap(two.objective, oracle.objective) <= 1e-6);
    }
}

#[test]
fn identity_sensor_with_consistent_counts_reproduces_the_prior_plans() {
    let mut rng = common::rng(99);
    for _ in 0..10 {
        let n = rng.gen_range(2..=10);
        let horizon = rng.gen_range(1..=10);
        let total = rng.gen_range(1.0..100.0);
        let prior = common::positive_marginal(&mut rng, n, total);
        let a = common::transition(&mut rng, n);
        let path = forward_propagate(&prior, &a, horizon).unwrap();
        let counts = path[1..].iter().map(|m| m.mass().clone()).collect();
        let inst = ProblemInstance::single_sensor(prior, a.clone(), ObservationModel::identity(n), counts);
        let est = estimate_flow(&inst, &EstimatorOptions::default()).unwrap();
        assert!(est.objective.abs() <= 1e-10, "{}", est.objective);
        for (t, plan) in est.transfer_plans.iter().enumerate() {
            let expected = Array2::from_shape_fn((n, n), |(i, j)| path[t].mass()[i] * a.kernel()[[i, j]]);
            assert!(common::max_abs(&plan.flow, &expected) <= 1e-8);
        }
    }
}

#[test]
fn stabilization_modes_agree_on_a_wide_chain() {
    let n = 40;
    let truth = build_gaussian_chain(n, 0.5, 1.0).unwrap();
    let model = build_gaussian_chain(n, 2.0, 0.0).unwrap();
    let b = build_binned_observation(n, 4, 0.5).unwrap();
    let weights: Vec<f64> = (1..=n).map(|i| if i <= 8 { 1.0 } else { 0.0 }).collect();
    let prior = Marginal::from_counts(&ensemble_flow::simulate::largest_remainder(&weights, 400));
    let traj = simulate(&prior, &truth, std::slice::from_ref(&b), 20, 3).unwrap();
    let inst = traj.to_instance(prior, model, vec![b]);
    let run = |mode| {
        estimate_flow(
            &inst,
            &EstimatorOptions {
                log_domain: mode,
                ..EstimatorOptions::default()
            },
        )
        .unwrap()
    };
    let on = run(Stabilization::On);
    let auto = run(Stabilization::Auto);
    for (a, b) in on.marginals.iter().zip(&auto.marginals) {
        assert!(l1(a.mass(), b.mass()) <= 1e-9 * 400.0);
    }
    assert!(common::relative_gap(auto.objective, on.objective) <= 1e-9);
}

#[test]
fn integer_optimum_approaches_the_continuous_plan() {
    let cases: Vec<(Vec<u64>, Vec<u64>, Vec<Vec<f64>>)> = vec![
        (vec![4, 4, 4], vec![6, 3, 3], vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.6, 0.2], vec![0.1, 0.3, 0.6]]),
        (vec![6, 3, 3], vec![2, 4, 6], vec![vec![0.5, 0.3, 0.2], vec![0.3, 0.4, 0.3], vec![0.2, 0.3, 0.5]]),
        (
            vec![3, 3, 3, 3],
            vec![5, 1, 3, 3],
            vec![
                vec![0.4, 0.3, 0.2, 0.1],
                vec![0.1, 0.4, 0.3, 0.2],
                vec![0.2, 0.1, 0.4, 0.3],
                vec![0.3, 0.2, 0.1, 0.4],
            ],
        ),
    ];
    for (mu0, mu1, rows) in cases {
        let a = ensemble_flow::model::TransitionModel::from_rows(&rows).unwrap();
        let (p0, p1) = (Marginal::from_counts(&mu0), Marginal::from_counts(&mu1));
        let discrete = brute_force_ml_plan(&p0, &a, &p1).unwrap();
        let ensemble_flow::oracle::OracleArgmin::IntegerPlan { plan } = &discrete.argmin else {
            panic!("enumeration returns an integer plan")
        };
        let continuous = solve_single_step(&p0, &p1, &a, &BridgeOptions::default()).unwrap();
        let total = p0.total();
        let n = mu0.len();
        let gap = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (plan[i][j] as f64 - continuous.plans[0].flow[[i, j]]).abs() / total)
            .fold(0.0, f64::max);
        assert!(gap <= 0.15, "{gap}");

        // Continuous optimum per particle against the best integer plan.
        let bound = -discrete.objective / total + (n * n) as f64 / 2.0 * total.ln() / total;
        assert!(continuous.objective / total <= bound);
    }
}

#[test]
fn continuous_optimum_never_beats_the_stirling_gap() {
    let mut rng = common::rng(31);
    for _ in 0..50 {
        let n = rng.gen_range(2..=4);
        let total = rng.gen_range(2..=12);
        let mu0 = Marginal::from_counts(&common::counts(&mut rng, n, total));
        let mu1 = Marginal::from_counts(&common::counts(&mut rng, n, total));
        let a = common::transition(&mut rng, n);
        let discrete = brute_force_ml_plan(&mu0, &a, &mu1).unwrap();
        let continuous = generic_kl_solver(&OracleProblem::SingleStep {
            mu0: mu0.clone(),
            mu1: mu1.clone(),
            transition: a,
        })
        .unwrap();
        let big_n = total as f64;
        let bound = -discrete.objective / big_n + (n * n) as f64 / 2.0 * big_n.ln() / big_n;
        assert!(continuous.objective / big_n <= bound + 1e-12);
    }
}

#[test]
fn many_step_kernel_is_a_plain_product() {
    let mut rng = common::rng(1);
    let a = common::positive_kernel(&mut rng, 3, 3);
    let a3 = matrix_power(&a, 3);
    assert!(common::max_abs(&a3, &a.dot(&a).dot(&a)) < 1e-15);
}
