//! Finite-ensemble simulation and the kernels of the particle-cloud model.
//!
//! Every particle moves independently, so row `i` of `M_t` is a multinomial
//! draw of `(μ_{t−1})_i` particles over row `i` of `A`, and row `i` of `D_ts`
//! a draw of `(μ_t)_i` particles over row `i` of `B_s`.
//!
//! The generator is ChaCha8 seeded from a `u64`. Multinomials are sampled as
//! sequential conditional binomials, and each binomial as a count of
//! Bernoulli trials `u < p` with `u = (next_u64 >> 11) · 2⁻⁵³`. Only integer
//! draws and exact comparisons are involved, so trajectories are identical
//! on every platform. Draws are consumed per time step: the rows of `M_t`
//! in state order, then for each sensor the rows of `D_ts`.

use ndarray::{Array1, Array2};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Marginal, ObservationModel, ProblemInstance, TransitionModel};

/// One realization of the ensemble. All quantities are particle counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    /// `μ₀ … μ_T`.
    pub marginals: Vec<Vec<u64>>,
    /// `transfer_plans[t - 1][i][j]`.
    pub transfer_plans: Vec<Vec<Vec<u64>>>,
    /// `observation_plans[t - 1][s][i][k]`.
    pub observation_plans: Vec<Vec<Vec<Vec<u64>>>>,
    /// `observations[t - 1][s][k]`, the column sums of the observation plans.
    pub observations: Vec<Vec<Vec<u64>>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.transfer_plans.len()
    }

    pub fn marginal(&self, t: usize) -> Marginal {
        Marginal::from_counts(&self.marginals[t])
    }

    pub fn observation_counts(&self) -> Vec<Vec<Array1<f64>>> {
        self.observations
            .iter()
            .map(|row| row.iter().map(|c| c.iter().map(|&x| x as f64).collect()).collect())
            .collect()
    }

    /// Estimation instance pairing the observed counts with a (possibly
    /// different) model.
    pub fn to_instance(
        &self,
        prior: Marginal,
        transition: TransitionModel,
        sensors: Vec<ObservationModel>,
    ) -> ProblemInstance {
        ProblemInstance::new(prior, transition, sensors, self.observation_counts())
    }
}

struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn binomial(&mut self, trials: u64, p: f64) -> u64 {
        if p >= 1.0 {
            return trials;
        }
        if p <= 0.0 {
            return 0;
        }
        (0..trials).filter(|_| self.uniform() < p).count() as u64
    }

    fn multinomial(&mut self, trials: u64, probs: &[f64]) -> Vec<u64> {
        let mut out = vec![0; probs.len()];
        let Some(last) = probs.iter().rposition(|&p| p > 0.0) else {
            return out;
        };
        let mut suffix = vec![0.0; probs.len() + 1];
        for j in (0..probs.len()).rev() {
            suffix[j] = suffix[j + 1] + probs[j];
        }
        let mut left = trials;
        for j in 0..last {
            if left == 0 {
                return out;
            }
            let k = self.binomial(left, probs[j] / suffix[j]);
            out[j] = k;
            left -= k;
        }
        out[last] = left;
        out
    }
}

fn integer_counts(prior: &Marginal) -> Result<Vec<u64>> {
    if !prior.is_integral() {
        return Err(Error::Precondition("simulation needs an integer prior".into()));
    }
    Ok(prior.mass().iter().map(|&x| x.round() as u64).collect())
}

/// Draws one trajectory of `horizon` steps.
pub fn simulate(
    prior: &Marginal,
    transition: &TransitionModel,
    sensors: &[ObservationModel],
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    let n = transition.n();
    crate::matrix::ensure_len("simulation prior", n, prior.len())?;
    for s in sensors {
        crate::matrix::ensure_len("simulation sensor rows", n, s.n())?;
    }
    let mut sampler = Sampler::new(seed);
    let mut current = integer_counts(prior)?;
    let a = transition.kernel();
    let mut traj = Trajectory {
        seed,
        marginals: vec![current.clone()],
        transfer_plans: Vec::with_capacity(horizon),
        observation_plans: Vec::with_capacity(horizon),
        observations: Vec::with_capacity(horizon),
    };
    for _ in 0..horizon {
        let plan: Vec<Vec<u64>> = (0..n)
            .map(|i| sampler.multinomial(current[i], a.row(i).as_slice().unwrap()))
            .collect();
        let next: Vec<u64> = (0..n).map(|j| plan.iter().map(|row| row[j]).sum()).collect();
        let mut obs_plans = Vec::with_capacity(sensors.len());
        let mut obs = Vec::with_capacity(sensors.len());
        for sensor in sensors {
            let b = sensor.kernel();
            let d: Vec<Vec<u64>> = (0..n)
                .map(|i| sampler.multinomial(next[i], b.row(i).as_slice().unwrap()))
                .collect();
            obs.push((0..sensor.m()).map(|k| d.iter().map(|row| row[k]).sum()).collect());
            obs_plans.push(d);
        }
        traj.transfer_plans.push(plan);
        traj.observation_plans.push(obs_plans);
        traj.observations.push(obs);
        traj.marginals.push(next.clone());
        current = next;
    }
    Ok(traj)
}

fn normalized_gaussian_rows(rows: usize, cols: usize, sigma: f64, center: impl Fn(usize) -> f64) -> Array2<f64> {
    let mut k = Array2::zeros((rows, cols));
    for i in 0..rows {
        let c = center(i + 1);
        let logits: Vec<f64> = (1..=cols)
            .map(|j| -(j as f64 - c).powi(2) / (2.0 * sigma * sigma))
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - top).exp()).sum();
        for (j, l) in logits.iter().enumerate() {
            k[[i, j]] = (l - top).exp() / z;
        }
    }
    k
}

/// Discretized Gaussian random walk on `1 … n`:
/// `a_ij ∝ exp(−(j − i − drift)² / 2σ²)`.
pub fn build_gaussian_chain(n: usize, sigma: f64, drift: f64) -> Result<TransitionModel> {
    if n == 0 || !(sigma > 0.0) || !drift.is_finite() {
        return Err(Error::Precondition(format!(
            "gaussian chain needs n ≥ 1, sigma > 0 and finite drift (n = {n}, sigma = {sigma}, drift = {drift})"
        )));
    }
    TransitionModel::renormalized(normalized_gaussian_rows(n, n, sigma, |i| i as f64 + drift))
}

/// Noisy binning of `n` states into `m` symbols:
/// `b_ij ∝ exp(−(j − c_i)² / 2σ_b²)` with `c_i = (i + w/2)/w`, `w = n/m`.
pub fn build_binned_observation(n: usize, m: usize, sigma_b: f64) -> Result<ObservationModel> {
    if n == 0 || m == 0 || !(sigma_b > 0.0) {
        return Err(Error::Precondition(format!(
            "binned observation needs n, m ≥ 1 and sigma_b > 0 (n = {n}, m = {m}, sigma_b = {sigma_b})"
        )));
    }
    let width = n as f64 / m as f64;
    ObservationModel::renormalized(normalized_gaussian_rows(n, m, sigma_b, |i| {
        (i as f64 + width / 2.0) / width
    }))
}

/// Rounds `weights · total / Σ weights` to integers summing to `total`,
/// giving leftover units to the largest remainders (ties to lower index).
pub fn largest_remainder(weights: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        out[i] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_kernel_keeps_particles_in_place() {
        let prior = Marginal::new(array![3.0, 0.0, 5.0]).unwrap();
        let traj = simulate(&prior, &TransitionModel::identity(3), &[], 4, 9).unwrap();
        assert!(traj.marginals.iter().all(|m| m == &vec![3, 0, 5]));
    }

    #[test]
    fn single_particle_moves_as_a_unit() {
        let prior = Marginal::new(array![0.0, 1.0, 0.0]).unwrap();
        let a = build_gaussian_chain(3, 1.0, 0.0).unwrap();
        let b = build_binned_observation(3, 2, 0.7).unwrap();
        let traj = simulate(&prior, &a, &[b], 6, 1).unwrap();
        for t in 0..6 {
            let plan = &traj.transfer_plans[t];
            assert_eq!(plan.iter().flatten().sum::<u64>(), 1);
            assert!(plan.iter().flatten().all(|&x| x <= 1));
            assert_eq!(traj.observations[t][0].iter().sum::<u64>(), 1);
        }
    }

    #[test]
    fn counts_are_conserved_and_consistent() {
        let prior = Marginal::from_counts(&[40, 10, 0, 25]);
        let a = build_gaussian_chain(4, 0.8, 1.0).unwrap();
        let sensors = vec![build_binned_observation(4, 2, 0.5).unwrap(), ObservationModel::identity(4)];
        let traj = simulate(&prior, &a, &sensors, 5, 77).unwrap();
        for t in 0..5 {
            assert_eq!(traj.marginals[t + 1].iter().sum::<u64>(), 75);
            for (i, row) in traj.transfer_plans[t].iter().enumerate() {
                assert_eq!(row.iter().sum::<u64>(), traj.marginals[t][i]);
            }
            for s in 0..2 {
                assert_eq!(traj.observations[t][s].iter().sum::<u64>(), 75);
            }
        }
        assert_eq!(traj.observations[0][1], traj.marginals[1]);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let prior = Marginal::from_counts(&[20, 20]);
        let a = TransitionModel::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let x = simulate(&prior, &a, &[], 10, 5).unwrap();
        let y = simulate(&prior, &a, &[], 10, 5).unwrap();
        let z = simulate(&prior, &a, &[], 10, 6).unwrap();
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn fractional_prior_is_rejected() {
        let prior = Marginal::new(array![0.5, 1.0]).unwrap();
        assert!(simulate(&prior, &TransitionModel::identity(2), &[], 1, 0).is_err());
    }

    #[test]
    fn single_state_chain() {
        let a = build_gaussian_chain(1, 0.5, 1.0).unwrap();
        assert_eq!(a.kernel(), &array![[1.0]]);
    }

    #[test]
    fn driftless_rows_are_symmetric_in_the_interior() {
        let a = build_gaussian_chain(11, 1.5, 0.0).unwrap();
        let k = a.kernel();
        for d in 1..=4 {
            assert!((k[[5, 5 - d]] - k[[5, 5 + d]]).abs() < 1e-15);
        }
    }

    #[test]
    fn drifting_chain_moves_one_state_right() {
        let a = build_gaussian_chain(5, 0.5, 1.0).unwrap();
        let k = a.kernel();
        // row 1 over j = 1..5: exp(−2(j−2)²) normalized
        let raw: Vec<f64> = (1..=5).map(|j: i32| (-2.0 * ((j - 2) as f64).powi(2)).exp()).collect();
        let z: f64 = raw.iter().sum();
        for j in 0..5 {
            assert!((k[[0, j]] - raw[j] / z).abs() < 1e-15);
        }
        assert_eq!(
            k.row(0).iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0,
            1
        );
    }

    #[test]
    fn bins_peak_at_their_centers() {
        let b = build_binned_observation(100, 5, 0.5).unwrap();
        let k = b.kernel();
        let argmax = |i: usize| k.row(i).iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax(9), 0);
        assert_eq!(argmax(29), 1);
        assert_eq!(argmax(99), 4);
        let one = build_binned_observation(7, 1, 0.5).unwrap();
        assert!(one.kernel().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn largest_remainder_hits_the_total() {
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.0, 2.0], 5), vec![0, 5]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 1000).iter().sum::<u64>(), 1000);
    }
}
