//! Wall-clock cost of one estimator sweep over a grid of problem sizes.

use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{EstimatorOptions, FlowSolver};
use crate::error::Result;
use crate::model::{forward_propagate, Marginal, ProblemInstance};
use crate::simulate::{build_binned_observation, build_gaussian_chain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub median_sweep_seconds: f64,
    pub timed_sweeps: usize,
}

const WARMUP_SWEEPS: usize = 2;

/// Instance with the particle-cloud structure: observations follow a
/// drifting chain, the estimator uses a wider non-drifting one.
pub fn probe_instance(n: usize, m: usize, horizon: usize) -> Result<ProblemInstance> {
    let truth = build_gaussian_chain(n, 0.5, 1.0)?;
    let model = build_gaussian_chain(n, 2.0, 0.0)?;
    let sensor = build_binned_observation(n, m, 0.5)?;
    let prior = Marginal::uniform(n, 1000.0);
    let path = forward_propagate(&prior, &truth, horizon)?;
    let counts: Vec<Array1<f64>> = path[1..].iter().map(|mu| sensor.kernel().t().dot(mu.mass())).collect();
    Ok(ProblemInstance::single_sensor(prior, model, sensor, counts))
}

/// Median time of `sweeps` consecutive sweeps for every `(n, horizon)` pair.
pub fn sweep_cost_probe(ns: &[usize], m: usize, horizons: &[usize], sweeps: usize) -> Result<Vec<ProbeRow>> {
    let mut rows = Vec::with_capacity(ns.len() * horizons.len());
    for &n in ns {
        for &horizon in horizons {
            let instance = probe_instance(n, m, horizon)?;
            let mut solver = FlowSolver::new(&instance, EstimatorOptions::default())?;
            for _ in 0..WARMUP_SWEEPS {
                solver.sweep()?;
            }
            let mut times = Vec::with_capacity(sweeps);
            for _ in 0..sweeps.max(1) {
                let start = Instant::now();
                solver.sweep()?;
                times.push(start.elapsed().as_secs_f64());
            }
            times.sort_by(f64::total_cmp);
            rows.push(ProbeRow {
                n,
                m,
                horizon,
                median_sweep_seconds: times[times.len() / 2],
                timed_sweeps: times.len(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_probe_runs() {
        let rows = sweep_cost_probe(&[1], 1, &[1, 2], 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.median_sweep_seconds >= 0.0 && r.timed_sweeps == 3));
    }
}
