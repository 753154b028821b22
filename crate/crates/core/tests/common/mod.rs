#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ensemble_flow::model::{Marginal, ObservationModel, ProblemInstance, TransitionModel};
use ensemble_flow::simulate::simulate;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-stochastic matrix with entries drawn from `[0.05, 1)` before
/// normalization.
pub fn positive_kernel(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut k = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(0.05..1.0));
    for mut row in k.outer_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    k
}

pub fn transition(rng: &mut ChaCha8Rng, n: usize) -> TransitionModel {
    TransitionModel::renormalized(positive_kernel(rng, n, n)).unwrap()
}

pub fn sensor(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ObservationModel {
    ObservationModel::renormalized(positive_kernel(rng, n, m)).unwrap()
}

/// `total` particles dropped independently and uniformly on `n` states.
pub fn counts(rng: &mut ChaCha8Rng, n: usize, total: u64) -> Vec<u64> {
    let mut c = vec![0; n];
    for _ in 0..total {
        c[rng.gen_range(0..n)] += 1;
    }
    c
}

pub fn positive_marginal(rng: &mut ChaCha8Rng, n: usize, total: f64) -> Marginal {
    let w: Array1<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s = w.sum();
    Marginal::new(w * (total / s)).unwrap()
}

/// Observations simulated under one random chain, estimated with another.
/// Feasible by construction: the simulated hidden path satisfies every
/// constraint.
pub fn hmm_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, horizon: usize, sensors: usize) -> ProblemInstance {
    let total = rng.gen_range(n as u64..=12);
    let mut prior = counts(rng, n, total);
    if prior.iter().all(|&c| c == 0) {
        prior[0] = 1;
    }
    let prior = Marginal::from_counts(&prior);
    let truth = transition(rng, n);
    let model = transition(rng, n);
    let sensors: Vec<ObservationModel> = (0..sensors).map(|_| sensor(rng, n, m)).collect();
    let traj = simulate(&prior, &truth, &sensors, horizon, rng.gen()).unwrap();
    traj.to_instance(prior, model, sensors)
}

pub fn relative_gap(a: f64, reference: f64) -> f64 {
    (a - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

pub fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
