//! Generalized KL divergence and the exact multinomial likelihood of a
//! transfer plan, together with the two Stirling-type bounds that tie the
//! likelihood to the divergence as the number of particles grows.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayBase, Data, Dimension};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::matrix::{row_sums, scale_rows};
use crate::model::{is_integral, Marginal, TransitionModel, TransferPlan};

/// `Σ pᵢ log(pᵢ / qᵢ)` over vectors or matrices of the same shape, with
/// `0 log 0 = 0`. No normalization is applied.
pub fn kl_divergence<S1, S2, D>(p: &ArrayBase<S1, D>, q: &ArrayBase<S2, D>) -> Result<f64>
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
    D: Dimension,
{
    if p.shape() != q.shape() {
        return Err(Error::DimensionMismatch {
            context: format!("kl_divergence shapes {:?} vs {:?}", p.shape(), q.shape()),
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut total = 0.0;
    for (k, (&pi, &qi)) in p.iter().zip(q.iter()).enumerate() {
        if pi < 0.0 || qi < 0.0 || !pi.is_finite() || !qi.is_finite() {
            return Err(Error::Precondition(format!(
                "kl_divergence needs finite nonnegative entries, got p = {pi}, q = {qi}"
            )));
        }
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::SupportViolation {
                index: unravel(k, p.shape()),
            });
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total)
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for (slot, &dim) in idx.iter_mut().zip(shape.iter()).rev() {
        *slot = flat % dim.max(1);
        flat /= dim.max(1);
    }
    idx
}

/// `H(plan | diag(mass) kernel)` evaluated term by term in logarithms, so
/// that a product `mass_i · kernel_ij` below the smallest float does not
/// count as a support violation.
pub fn plan_divergence(plan: &Array2<f64>, mass: &Array1<f64>, kernel: &Array2<f64>) -> Result<f64> {
    if plan.dim() != kernel.dim() || mass.len() != kernel.nrows() {
        return Err(Error::DimensionMismatch {
            context: format!("plan_divergence shapes {:?} vs {:?}", plan.shape(), kernel.shape()),
            expected: kernel.len(),
            found: plan.len(),
        });
    }
    let mut total = 0.0;
    for ((i, j), &p) in plan.indexed_iter() {
        if p == 0.0 {
            continue;
        }
        let (m, k) = (mass[i], kernel[[i, j]]);
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::Precondition(format!("plan entry ({i}, {j}) is {p}")));
        }
        if !(m > 0.0 && k > 0.0) {
            return Err(Error::SupportViolation { index: vec![i, j] });
        }
        total += p * (p.ln() - m.ln() - k.ln());
    }
    Ok(total)
}

/// `diag(μ) A`, the expected transfer plan under the prior dynamics.
pub fn prior_plan(prior: &Marginal, transition: &TransitionModel) -> Array2<f64> {
    scale_rows(transition.kernel(), prior.mass())
}

fn check_integer_plan(prior: &Marginal, transition: &TransitionModel, plan: &TransferPlan) -> Result<()> {
    let n = transition.n();
    if prior.len() != n || plan.flow.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "transfer likelihood".into(),
            expected: n,
            found: prior.len(),
        });
    }
    if !prior.is_integral() || !plan.flow.iter().all(|&x| x >= 0.0 && is_integral(x)) {
        return Err(Error::Precondition(
            "transfer likelihood needs nonnegative integer prior and plan".into(),
        ));
    }
    let rows = row_sums(&plan.flow);
    for (i, (&r, &m)) in rows.iter().zip(prior.mass().iter()).enumerate() {
        if (r - m).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "plan row {i} sums to {r}, prior has {m}"
            )));
        }
    }
    Ok(())
}

/// First entry of `plan` that is positive where `diag(prior) A` vanishes.
pub fn first_support_violation(
    prior: &Marginal,
    transition: &TransitionModel,
    plan: &TransferPlan,
) -> Option<(usize, usize)> {
    let k = prior_plan(prior, transition);
    plan.flow
        .indexed_iter()
        .find(|&((i, j), &m)| m > 0.0 && k[[i, j]] == 0.0)
        .map(|(ij, _)| ij)
}

/// Exact log-probability of an integer transfer plan when every particle
/// moves independently according to `transition`:
///
/// `Σᵢ [ log multinomial(μᵢ; mᵢ₁ … mᵢₙ) + Σⱼ mᵢⱼ log aᵢⱼ ]`
///
/// Returns `-∞` when the plan uses a transition of zero probability; see
/// [`first_support_violation`] for the offending entry.
pub fn log_transfer_likelihood(
    prior: &Marginal,
    transition: &TransitionModel,
    plan: &TransferPlan,
) -> Result<f64> {
    check_integer_plan(prior, transition, plan)?;
    if first_support_violation(prior, transition, plan).is_some() {
        return Ok(f64::NEG_INFINITY);
    }
    let a = transition.kernel();
    let mut total = 0.0;
    for (i, row) in plan.flow.outer_iter().enumerate() {
        total += ln_gamma(prior.mass()[i].round() + 1.0);
        for (j, &m) in row.iter().enumerate() {
            if m > 0.0 {
                let m = m.round();
                total += m * a[[i, j]].ln() - ln_gamma(m + 1.0);
            }
        }
    }
    Ok(total)
}

/// Exact log-likelihood of a plan next to its KL rate and the slack in the
/// two Stirling bounds
///
/// `−H − ½(n² log N + n(n−1) log 2π) ≤ L ≤ −H + (n/2) log N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub exact_log_likelihood: f64,
    pub kl_rate: f64,
    pub upper_slack: f64,
    pub lower_slack: f64,
    pub n_particles: f64,
}

pub fn likelihood_bounds(
    prior: &Marginal,
    transition: &TransitionModel,
    plan: &TransferPlan,
) -> Result<LikelihoodReport> {
    let total = prior.total();
    if total < 2.0 {
        return Err(Error::Precondition(format!(
            "likelihood bounds need at least two particles, got {total}"
        )));
    }
    let log_likelihood = log_transfer_likelihood(prior, transition, plan)?;
    let rate = kl_divergence(&plan.flow, &prior_plan(prior, transition))?;
    let n = transition.n() as f64;
    let log_n = total.ln();
    let upper = -rate + 0.5 * n * log_n;
    let lower = -rate - 0.5 * (n * n + n * (n - 1.0) * (2.0 * PI).ln() / log_n) * log_n;
    Ok(LikelihoodReport {
        exact_log_likelihood: log_likelihood,
        kl_rate: rate,
        upper_slack: upper - log_likelihood,
        lower_slack: log_likelihood - lower,
        n_particles: total,
    })
}
