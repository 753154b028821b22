//! Most likely flow of an ensemble on a hidden Markov chain given aggregate
//! observations from one or more sensors.
//!
//! Minimizes
//!
//! ```text
//! Σ_t H(M_t | diag(μ_{t−1}) A) + Σ_t Σ_s H(D_ts | diag(μ_t) B_s)
//! M_t 1 = μ_{t−1},  M_tᵀ 1 = μ_t,  D_ts 1 = μ_t,  D_tsᵀ 1 = Φ_ts
//! ```
//!
//! by block coordinate ascent in the dual. The iterate is the scaling vector
//! `u₁` and one vector `v_ts` per time and sensor; the backward vectors
//!
//! ```text
//! w_{T+1} = 1,   w_t = (⊙_s B_s v_ts) ⊙ A w_{t+1}
//! ```
//!
//! and forward vectors `y₁ = Aᵀ(μ₀ ⊙ u₁)`, `y_t = Aᵀ(y_{t−1} ⊙ ⊙_s B_s v_{s,t−1})`
//! are caches. Each sweep recomputes `w` once, sets `u₁ = 1 ./ A w₁` and then
//! updates `v_ts = Φ_ts ./ B_sᵀ(y_t ⊙ A w_{t+1} ⊙ ⊙_{s'≠s} B_{s'} v_{s't})` in
//! increasing `t`. Only the observation column sums are ever violated by the
//! reconstructed primal, so they define the residual.

mod probe;
mod scaled;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::divergence::plan_divergence;
use crate::error::{Error, Result};
use crate::matrix::{self, col_sums, row_sums, scale_cols, scale_rows};
use crate::model::{ensure_valid, Marginal, ObservationPlan, ProblemInstance, TransferPlan};

pub use probe::{probe_instance, sweep_cost_probe, ProbeRow};
use scaled::Scaled;

/// When the recursions move vector magnitudes into a separate binary
/// exponent. `Auto` does so only for vectors whose largest entry leaves
/// `[1e-100, 1e100]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stabilization {
    #[default]
    Auto,
    On,
    Off,
}

impl FromStr for Stabilization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Self::Auto),
            "on" => Ok(Self::On),
            "off" => Ok(Self::Off),
            other => Err(format!("expected auto, on or off, got {other:?}")),
        }
    }
}

impl fmt::Display for Stabilization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::On => "on",
            Self::Off => "off",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub log_domain: Stabilization,
    /// Starting `v_ts`, indexed `[t - 1][s]`. All ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_duals: Option<Vec<Vec<Vec<f64>>>>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 100_000,
            log_domain: Stabilization::Auto,
            initial_duals: None,
        }
    }
}

/// Dual scaling vectors at the returned iterate. `v[t - 1][s]`, `y[t - 1]`
/// and `w[t - 1]` belong to time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    #[serde(with = "matrix::flat")]
    pub u1: Array1<f64>,
    #[serde(with = "matrix::flat_grid")]
    pub v: Vec<Vec<Array1<f64>>>,
    #[serde(with = "matrix::flat_list")]
    pub y: Vec<Array1<f64>>,
    #[serde(with = "matrix::flat_list")]
    pub w: Vec<Array1<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEstimate {
    /// `μ₁ … μ_T`.
    pub marginals: Vec<Marginal>,
    pub transfer_plans: Vec<TransferPlan>,
    /// `observation_plans[t - 1][s]`.
    pub observation_plans: Vec<Vec<ObservationPlan>>,
    pub dual: DualState,
    /// Dual objective after every `u₁` update, starting from the initial duals.
    pub dual_objective_trace: Vec<f64>,
    pub sweeps: usize,
    /// Largest violation of any constraint family relative to the total mass.
    pub residual: f64,
    pub objective: f64,
}

/// Single-sensor estimation. Rejects instances with more than one sensor.
pub fn estimate_flow(instance: &ProblemInstance, opts: &EstimatorOptions) -> Result<FlowEstimate> {
    if instance.sensor_count() != 1 {
        return Err(Error::Precondition(format!(
            "estimate_flow takes exactly one sensor, found {}; use estimate_flow_multi",
            instance.sensor_count()
        )));
    }
    estimate_flow_multi(instance, opts)
}

pub fn estimate_flow_multi(instance: &ProblemInstance, opts: &EstimatorOptions) -> Result<FlowEstimate> {
    let mut solver = FlowSolver::new(instance, opts.clone())?;
    loop {
        let residual = solver.residual()?;
        if solver.sweeps() > 0 && residual <= opts.tol && solver.relative_change() <= opts.tol {
            return solver.finish();
        }
        if solver.sweeps() >= opts.max_sweeps {
            return Err(Error::NotConverged {
                iterations: solver.sweeps(),
                residual,
                trace: solver.trace,
            });
        }
        solver.sweep()?;
    }
}

/// Iteration state of the dual block coordinate ascent. After construction
/// and after every [`FlowSolver::sweep`] the backward caches and `u₁` are
/// current.
pub struct FlowSolver<'a> {
    instance: &'a ProblemInstance,
    mode: Stabilization,
    a: Array2<f64>,
    at: Array2<f64>,
    b: Vec<Array2<f64>>,
    bt: Vec<Array2<f64>>,
    mass: f64,
    v: Vec<Vec<Scaled>>,
    bv: Vec<Vec<Array1<f64>>>,
    /// `aw[t] = A w_{t+1}` for `t = 0 … T`.
    aw: Vec<Scaled>,
    u1: Scaled,
    trace: Vec<f64>,
    sweeps: usize,
}

impl<'a> FlowSolver<'a> {
    pub fn new(instance: &'a ProblemInstance, opts: EstimatorOptions) -> Result<Self> {
        ensure_valid(instance)?;
        if instance.horizon == 0 {
            return Err(Error::Precondition("horizon must be at least 1".into()));
        }
        let horizon = instance.horizon;
        let sensors = instance.sensor_count();
        let a = instance.transition.kernel().clone();
        let b: Vec<Array2<f64>> = instance.sensors.iter().map(|s| s.kernel().clone()).collect();
        let mut v = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let mut row = Vec::with_capacity(sensors);
            for s in 0..sensors {
                let m = b[s].ncols();
                let init = match &opts.initial_duals {
                    None => Array1::ones(m),
                    Some(grid) => {
                        let given = grid.get(t).and_then(|r| r.get(s)).ok_or_else(|| {
                            Error::Precondition(format!("initial duals miss t = {}, s = {s}", t + 1))
                        })?;
                        matrix::ensure_len("initial dual", m, given.len())?;
                        if given.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                            return Err(Error::Precondition("initial duals must be positive".into()));
                        }
                        Array1::from(given.clone())
                    }
                };
                row.push(Scaled::new(init, 0).rebalance(opts.log_domain));
            }
            v.push(row);
        }
        let bv = v
            .iter()
            .map(|row| row.iter().zip(&b).map(|(vs, bs)| bs.dot(&vs.m)).collect())
            .collect();
        let terminal = Scaled::new(a.dot(&Array1::ones(a.nrows())), 0);
        let mut solver = Self {
            instance,
            mode: opts.log_domain,
            at: a.t().to_owned(),
            bt: b.iter().map(|m| m.t().to_owned()).collect(),
            a,
            b,
            mass: instance.total_mass(),
            v,
            bv,
            aw: vec![terminal; horizon + 1],
            u1: Scaled::new(Array1::zeros(0), 0),
            trace: Vec::new(),
            sweeps: 0,
        };
        solver.backward()?;
        Ok(solver)
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn dual_objective_trace(&self) -> &[f64] {
        &self.trace
    }

    fn relative_change(&self) -> f64 {
        match self.trace.as_slice() {
            [.., prev, last] => (last - prev).abs() / last.abs().max(1.0),
            _ => f64::INFINITY,
        }
    }

    /// `⊙_s B_s v_ts` for time `t`.
    fn observation_factor(&self, t: usize, skip: Option<usize>) -> Scaled {
        let mut m = Array1::ones(self.a.nrows());
        let mut e = 0;
        for (s, bv) in self.bv[t - 1].iter().enumerate() {
            if Some(s) != skip {
                m *= bv;
                e += self.v[t - 1][s].e;
            }
        }
        Scaled::new(m, e)
    }

    /// Recomputes `w` from the current `v`, then `u₁`, and records the dual
    /// objective `−μ₀ᵀ log(A w₁) + Σ Φ_tsᵀ log v_ts`.
    fn backward(&mut self) -> Result<()> {
        let horizon = self.instance.horizon;
        for t in (1..=horizon).rev() {
            let w = self.observation_factor(t, None).hadamard(&self.aw[t]).rebalance(self.mode);
            self.aw[t - 1] = Scaled::new(self.a.dot(&w.m), w.e).rebalance(self.mode);
        }
        let mu0 = self.instance.prior.mass();
        let aw0 = &self.aw[0];
        let mut u1 = Array1::zeros(mu0.len());
        let mut objective = 0.0;
        for (i, &mass) in mu0.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            if !(aw0.m[i] > 0.0) {
                return Err(Error::DegenerateSupport {
                    time: 0,
                    index: i,
                    detail: "initial state with mass cannot reach any observed symbol".into(),
                });
            }
            u1[i] = 1.0 / aw0.m[i];
            objective -= mass * aw0.ln_at(i);
        }
        self.u1 = Scaled::new(u1, -aw0.e);
        for t in 1..=horizon {
            for (s, v) in self.v[t - 1].iter().enumerate() {
                for (k, &phi) in self.instance.counts(t, s).iter().enumerate() {
                    if phi > 0.0 {
                        objective += phi * v.ln_at(k);
                    }
                }
            }
        }
        self.trace.push(objective);
        Ok(())
    }

    /// One full update of every `v_ts` followed by the backward refresh and
    /// the `u₁` update.
    pub fn sweep(&mut self) -> Result<()> {
        let horizon = self.instance.horizon;
        let mu0 = self.instance.prior.mass();
        let mut y = Scaled::new(self.at.dot(&(mu0 * &self.u1.m)), self.u1.e).rebalance(self.mode);
        for t in 1..=horizon {
            if t > 1 {
                let obs = self.observation_factor(t - 1, None);
                let carried = y.hadamard(&obs);
                y = Scaled::new(self.at.dot(&carried.m), carried.e).rebalance(self.mode);
            }
            let g = y.hadamard(&self.aw[t]).rebalance(self.mode);
            for s in 0..self.b.len() {
                let weight = g.hadamard(&self.observation_factor(t, Some(s))).rebalance(self.mode);
                let denom = self.bt[s].dot(&weight.m);
                let phi = self.instance.counts(t, s);
                let mut v = Array1::zeros(phi.len());
                for k in 0..phi.len() {
                    v[k] = if phi[k] == 0.0 {
                        0.0
                    } else if denom[k] > 0.0 {
                        phi[k] / denom[k]
                    } else {
                        return Err(Error::DegenerateSupport {
                            time: t,
                            index: k,
                            detail: format!("sensor {s} reports mass on a symbol no state can emit"),
                        });
                    };
                }
                let v = Scaled::new(v, -weight.e).rebalance(self.mode);
                self.bv[t - 1][s] = self.b[s].dot(&v.m);
                self.v[t - 1][s] = v;
            }
        }
        self.sweeps += 1;
        self.backward()
    }

    /// Forward reconstruction of the primal marginals from the current duals.
    /// Calls `visit(t, w_t, ρ_t, μ_t)` with `ρ_t = μ_{t−1} ./ A w_t`.
    fn reconstruct(&self, mut visit: impl FnMut(usize, &Array1<f64>, &Array1<f64>, &Array1<f64>) -> Result<()>) -> Result<()> {
        let mut prev = self.instance.prior.mass().clone();
        for t in 1..=self.instance.horizon {
            let w = self.observation_factor(t, None).hadamard(&self.aw[t]).m;
            let rho = safe_ratio(&prev, &self.a.dot(&w), t - 1)?;
            let mu = &w * &self.at.dot(&rho);
            visit(t, &w, &rho, &mu)?;
            prev = mu;
        }
        Ok(())
    }

    /// `max_ts ‖D_tsᵀ 1 − Φ_ts‖_∞ / N` for the reconstructed primal.
    pub fn residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        self.reconstruct(|t, _, _, mu| {
            for s in 0..self.b.len() {
                let rho = safe_ratio(mu, &self.bv[t - 1][s], t)?;
                let cols = &self.v[t - 1][s].m * &self.bt[s].dot(&rho);
                worst = worst.max(matrix::max_abs_diff(&cols, self.instance.counts(t, s)));
            }
            Ok(())
        })?;
        Ok(worst / self.mass)
    }

    /// Primal plans and marginals at the current iterate.
    pub fn finish(self) -> Result<FlowEstimate> {
        let horizon = self.instance.horizon;
        let mut marginals = Vec::with_capacity(horizon);
        let mut transfer_plans = Vec::with_capacity(horizon);
        let mut observation_plans = Vec::with_capacity(horizon);
        let mut w_out = Vec::with_capacity(horizon);
        self.reconstruct(|t, w, rho, mu| {
            transfer_plans.push(TransferPlan {
                time_index: t,
                flow: scale_cols(&scale_rows(&self.a, rho), w),
            });
            let mut plans = Vec::with_capacity(self.b.len());
            for s in 0..self.b.len() {
                let rho = safe_ratio(mu, &self.bv[t - 1][s], t)?;
                plans.push(ObservationPlan {
                    time_index: t,
                    sensor_index: s,
                    assignment: scale_cols(&scale_rows(&self.b[s], &rho), &self.v[t - 1][s].m),
                });
            }
            observation_plans.push(plans);
            marginals.push(Marginal::new(mu.clone())?);
            w_out.push(self.observation_factor(t, None).hadamard(&self.aw[t]).value());
            Ok(())
        })?;

        let mut y = Vec::with_capacity(horizon);
        let mut fwd = Scaled::new(self.at.dot(&(self.instance.prior.mass() * &self.u1.m)), self.u1.e)
            .rebalance(self.mode);
        for t in 1..=horizon {
            if t > 1 {
                let carried = fwd.hadamard(&self.observation_factor(t - 1, None));
                fwd = Scaled::new(self.at.dot(&carried.m), carried.e).rebalance(self.mode);
            }
            y.push(fwd.value());
        }

        let residual = primal_residual(self.instance, &marginals, &transfer_plans, &observation_plans);
        let objective = primal_objective(self.instance, &marginals, &transfer_plans, &observation_plans)?;
        Ok(FlowEstimate {
            marginals,
            transfer_plans,
            observation_plans,
            dual: DualState {
                u1: self.u1.value(),
                v: self.v.iter().map(|row| row.iter().map(Scaled::value).collect()).collect(),
                y,
                w: w_out,
            },
            dual_objective_trace: self.trace,
            sweeps: self.sweeps,
            residual,
            objective,
        })
    }
}

/// `num ./ den` with `0 / anything = 0`.
fn safe_ratio(num: &Array1<f64>, den: &Array1<f64>, time: usize) -> Result<Array1<f64>> {
    let mut out = Array1::zeros(num.len());
    for i in 0..num.len() {
        if num[i] == 0.0 {
            continue;
        }
        if !(den[i] > 0.0) {
            return Err(Error::DegenerateSupport {
                time,
                index: i,
                detail: format!("state carries mass {} but its scaling denominator is {}", num[i], den[i]),
            });
        }
        out[i] = num[i] / den[i];
    }
    Ok(out)
}

fn primal_residual(
    instance: &ProblemInstance,
    marginals: &[Marginal],
    transfer: &[TransferPlan],
    observation: &[Vec<ObservationPlan>],
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut prev = instance.prior.mass();
    for t in 0..instance.horizon {
        let mu = marginals[t].mass();
        let m = &transfer[t].flow;
        worst = worst
            .max(matrix::max_abs_diff(&row_sums(m), prev))
            .max(matrix::max_abs_diff(&col_sums(m), mu));
        for (s, plan) in observation[t].iter().enumerate() {
            worst = worst
                .max(matrix::max_abs_diff(&row_sums(&plan.assignment), mu))
                .max(matrix::max_abs_diff(&col_sums(&plan.assignment), instance.counts(t + 1, s)));
        }
        prev = mu;
    }
    worst / instance.total_mass()
}

fn primal_objective(
    instance: &ProblemInstance,
    marginals: &[Marginal],
    transfer: &[TransferPlan],
    observation: &[Vec<ObservationPlan>],
) -> Result<f64> {
    let a = instance.transition.kernel();
    let mut total = 0.0;
    let mut prev = instance.prior.mass();
    for t in 0..instance.horizon {
        let mu = marginals[t].mass();
        total += plan_divergence(&transfer[t].flow, prev, a)?;
        for (s, plan) in observation[t].iter().enumerate() {
            total += plan_divergence(&plan.assignment, mu, instance.sensors[s].kernel())?;
        }
        prev = mu;
    }
    Ok(total)
}

/// `Σ_t H(M_t | diag(μ_{t−1}) A) + Σ_t Σ_s H(D_ts | diag(μ_t) B_s)` for an
/// estimate whose constraint residual is at most `1e-6`.
pub fn evaluate_primal_objective(estimate: &FlowEstimate, instance: &ProblemInstance) -> Result<f64> {
    if !(estimate.residual <= 1e-6) {
        return Err(Error::Precondition(format!(
            "estimate residual {:e} exceeds 1e-6",
            estimate.residual
        )));
    }
    if estimate.marginals.len() != instance.horizon
        || estimate.observation_plans.iter().any(|r| r.len() != instance.sensor_count())
    {
        return Err(Error::DimensionMismatch {
            context: "estimate vs instance horizon".into(),
            expected: instance.horizon,
            found: estimate.marginals.len(),
        });
    }
    primal_objective(
        instance,
        &estimate.marginals,
        &estimate.transfer_plans,
        &estimate.observation_plans,
    )
}
