//! Discrete Schrödinger bridges: the most likely transfer plans between
//! fixed endpoint marginals under Markov prior dynamics.
//!
//! A `T`-step bridge only constrains the endpoints, so the endpoint coupling
//! is the one-step KL projection against the `T`-step kernel `Aᵀ` (matrix
//! power). With scalings `α`, `β` of that projection, the forward vectors
//! `f₀ = μ₀ ⊙ α`, `f_t = Aᵀ f_{t−1}` and backward vectors `h_T = β`,
//! `h_{t−1} = A h_t` give every intermediate quantity:
//!
//! ```text
//! μ_t = f_t ⊙ h_t,    M_t = diag(f_{t−1}) · A · diag(h_t)
//! ```

mod feasibility;
mod sinkhorn;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::divergence::{kl_divergence, plan_divergence};
use crate::error::{Error, Result};
use crate::matrix::{self, col_sums, matrix_power, row_sums, scale_cols, scale_rows};
use crate::model::{Marginal, TransferPlan, TransitionModel, MASS_TOL};

pub use feasibility::transport_feasible;
pub use sinkhorn::{Scaling, Sinkhorn};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeOptions {
    /// Bound on the ∞-norm marginal violation relative to total mass.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeSolution {
    pub plans: Vec<TransferPlan>,
    /// `μ₀ … μ_T`; both endpoints are the inputs, unchanged.
    pub marginals: Vec<Marginal>,
    pub objective: f64,
    pub iterations: usize,
    pub residual: f64,
    pub residual_trace: Vec<f64>,
}

impl BridgeSolution {
    pub fn horizon(&self) -> usize {
        self.plans.len()
    }
}

/// Most likely one-step plan `M` from `mu0` to `mu1`:
/// minimize `H(M | diag(μ₀) A)` subject to `M1 = μ₀`, `Mᵀ1 = μ₁`.
pub fn solve_single_step(
    mu0: &Marginal,
    mu1: &Marginal,
    transition: &TransitionModel,
    opts: &BridgeOptions,
) -> Result<BridgeSolution> {
    solve_chain(mu0, mu1, transition, 1, opts)
}

fn check_bridge_inputs(mu0: &Marginal, mu_t: &Marginal, transition: &TransitionModel) -> Result<()> {
    let n = transition.n();
    matrix::ensure_len("bridge initial marginal", n, mu0.len())?;
    matrix::ensure_len("bridge final marginal", n, mu_t.len())?;
    let bad_rows: Vec<_> = transition
        .row_sum_errors()
        .into_iter()
        .filter(|&(_, s)| s != 0.0)
        .collect();
    if !bad_rows.is_empty() {
        return Err(Error::Precondition(format!(
            "transition rows must sum to one: {bad_rows:?}"
        )));
    }
    let (a, b) = (mu0.total(), mu_t.total());
    if !(a > 0.0) || (a - b).abs() > MASS_TOL * a {
        return Err(Error::Precondition(format!(
            "endpoint masses must be positive and equal, got {a} and {b}"
        )));
    }
    Ok(())
}

/// Most likely `horizon`-step evolution between `mu0` and `mu_t`:
/// minimize `Σ_t H(M_t | diag(μ_{t−1}) A)` over plans and interior marginals.
pub fn solve_chain(
    mu0: &Marginal,
    mu_t: &Marginal,
    transition: &TransitionModel,
    horizon: usize,
    opts: &BridgeOptions,
) -> Result<BridgeSolution> {
    if horizon == 0 {
        return Err(Error::Precondition("bridge horizon must be at least 1".into()));
    }
    check_bridge_inputs(mu0, mu_t, transition)?;
    let a = transition.kernel();
    let endpoint_kernel = scale_rows(&matrix_power(a, horizon), mu0.mass());
    let scaling = Sinkhorn::new(&endpoint_kernel, mu0.mass(), mu_t.mass())
        .tolerance(opts.tol)
        .max_iters(opts.max_iters)
        .solve()?;

    let mut backward = vec![Array1::zeros(0); horizon + 1];
    backward[horizon] = scaling.col_scaling.clone();
    for t in (0..horizon).rev() {
        backward[t] = a.dot(&backward[t + 1]);
    }
    let mut forward = mu0.mass() * &scaling.row_scaling;

    let mut marginals = vec![mu0.clone()];
    let mut plans = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let flow = scale_cols(&scale_rows(a, &forward), &backward[t]);
        forward = a.t().dot(&forward);
        if t < horizon {
            marginals.push(Marginal::new(&forward * &backward[t])?);
        }
        plans.push(TransferPlan { time_index: t, flow });
    }
    marginals.push(mu_t.clone());

    let objective = chain_objective(&plans, &marginals, transition)?;
    let residual = plan_residual(&plans, &marginals);
    Ok(BridgeSolution {
        plans,
        marginals,
        objective,
        iterations: scaling.iterations,
        residual,
        residual_trace: scaling.residual_trace,
    })
}

/// `Σ_t H(M_t | diag(μ_{t−1}) A)`.
pub fn chain_objective(
    plans: &[TransferPlan],
    marginals: &[Marginal],
    transition: &TransitionModel,
) -> Result<f64> {
    plans
        .iter()
        .zip(marginals)
        .map(|(p, m)| plan_divergence(&p.flow, m.mass(), transition.kernel()))
        .sum()
}

/// Largest row/column violation of the plans against the marginals,
/// relative to the initial mass.
pub fn plan_residual(plans: &[TransferPlan], marginals: &[Marginal]) -> f64 {
    let total = marginals[0].total().max(f64::MIN_POSITIVE);
    plans
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let r = matrix::max_abs_diff(&row_sums(&p.flow), marginals[t].mass());
            let c = matrix::max_abs_diff(&col_sums(&p.flow), marginals[t + 1].mass());
            r.max(c)
        })
        .fold(0.0, f64::max)
        / total
}

/// Per-step row-stochastic factors `M̄_t = diag(μ_{t−1})⁻¹ M_t`.
pub fn factor_row_stochastic(solution: &BridgeSolution) -> Result<Vec<Array2<f64>>> {
    solution
        .plans
        .iter()
        .zip(&solution.marginals)
        .map(|(plan, mu)| {
            if let Some(state) = mu.mass().iter().position(|&m| m <= 0.0) {
                return Err(Error::ZeroMassFactorization {
                    time: plan.time_index,
                    state,
                });
            }
            Ok(scale_rows(&plan.flow, &mu.mass().mapv(|m| 1.0 / m)))
        })
        .collect()
}

/// The same objective written through the row-stochastic factors:
/// `Σ_t Σ_i (μ_{t−1})_i H(M̄_{t,i·} | A_{i·})`.
pub fn factored_objective(
    factors: &[Array2<f64>],
    marginals: &[Marginal],
    transition: &TransitionModel,
) -> Result<f64> {
    let a = transition.kernel();
    let mut total = 0.0;
    for (factor, mu) in factors.iter().zip(marginals) {
        for (i, row) in factor.axis_iter(Axis(0)).enumerate() {
            total += mu.mass()[i] * kl_divergence(&row, &a.row(i))?;
        }
    }
    Ok(total)
}

/// Entropy-regularized transport: minimize `tr(CᵀM) + ε H(M | 1)` over
/// plans with marginals `mu0`, `mu1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropicOmtProblem {
    #[serde(with = "matrix::nested")]
    pub cost: Array2<f64>,
    pub epsilon: f64,
    pub mu0: Marginal,
    pub mu1: Marginal,
}

/// The KL-projection form of an [`EntropicOmtProblem`].
///
/// For every plan with row sums `mu0`,
/// `tr(CᵀM)/ε + H(M | 1) = H(M | diag(μ₀) A) + objective_offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct KlForm {
    pub mu0: Marginal,
    pub mu1: Marginal,
    pub transition: TransitionModel,
    pub objective_offset: f64,
}

pub fn entropic_ot_as_kl(problem: &EntropicOmtProblem) -> Result<KlForm> {
    let (n, m) = problem.cost.dim();
    matrix::ensure_len("entropic OT cost (square)", n, m)?;
    matrix::ensure_len("entropic OT initial marginal", n, problem.mu0.len())?;
    matrix::ensure_len("entropic OT final marginal", n, problem.mu1.len())?;
    if !(problem.epsilon > 0.0) {
        return Err(Error::Precondition("epsilon must be positive".into()));
    }
    if !problem.mu0.is_strictly_positive() {
        return Err(Error::Precondition(
            "initial marginal must be strictly positive".into(),
        ));
    }
    if problem.cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Precondition("cost must be finite".into()));
    }
    let mut kernel = Array2::zeros((n, n));
    let mut offset = 0.0;
    for i in 0..n {
        let logits = problem.cost.row(i).mapv(|c| -c / problem.epsilon);
        let top = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_norm = top + logits.mapv(|l| (l - top).exp()).sum().ln();
        for j in 0..n {
            kernel[[i, j]] = (logits[j] - log_norm).exp();
        }
        let mass = problem.mu0.mass()[i];
        offset += mass * (mass.ln() - log_norm);
    }
    Ok(KlForm {
        mu0: problem.mu0.clone(),
        mu1: problem.mu1.clone(),
        transition: TransitionModel::renormalized(kernel)?,
        objective_offset: offset,
    })
}

/// `tr(CᵀM) + ε H(M | 1)`.
pub fn entropic_ot_objective(problem: &EntropicOmtProblem, plan: &Array2<f64>) -> Result<f64> {
    let transport = (&problem.cost * plan).sum();
    let entropy = kl_divergence(plan, &Array2::ones(plan.raw_dim()))?;
    Ok(transport + problem.epsilon * entropy)
}

#[derive(Clone, Debug)]
pub struct EntropicOtSolution {
    pub plan: Array2<f64>,
    pub objective: f64,
    pub kl_objective: f64,
    pub objective_offset: f64,
}

/// Solves an entropic transport problem through its KL-projection form.
pub fn solve_entropic_ot(problem: &EntropicOmtProblem, opts: &BridgeOptions) -> Result<EntropicOtSolution> {
    let form = entropic_ot_as_kl(problem)?;
    let bridge = solve_single_step(&form.mu0, &form.mu1, &form.transition, opts)?;
    let plan = bridge.plans[0].flow.clone();
    Ok(EntropicOtSolution {
        objective: entropic_ot_objective(problem, &plan)?,
        plan,
        kl_objective: bridge.objective,
        objective_offset: form.objective_offset,
    })
}
