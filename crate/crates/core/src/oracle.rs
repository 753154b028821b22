//! Slow reference solvers for desk-scale instances.
//!
//! [`generic_kl_solver`] works on the space of complete paths
//! `(x₀, …, x_T, y_ts)` with prior weight `μ₀(x₀) Π_t A(x_{t−1}, x_t)
//! Π_{t,s} B_s(x_t, y_ts)`. Matching the marginal of `x₀` and of every
//! `y_ts` is a plain KL projection onto linear constraints whose minimum
//! equals the sum of the transfer and observation divergences. It is
//! solved by damped Newton ascent on the dual
//!
//! ```text
//! g(λ) = bᵀλ − Σ_paths r · exp(Cᵀλ − 1)
//! ```
//!
//! with the Hessian factored by Cholesky. [`brute_force_ml_plan`]
//! enumerates integer transfer plans.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::divergence::log_transfer_likelihood;
use crate::error::{Error, Result};
use crate::model::{
    ensure_valid, is_integral, Marginal, ObservationPlan, ProblemInstance, TransferPlan, TransitionModel,
};

/// Largest number of enumerated paths.
pub const MAX_PATHS: usize = 4_000_000;
pub const ENUMERATION_MAX_STATES: usize = 4;
pub const ENUMERATION_MAX_PARTICLES: f64 = 12.0;
/// Every emitted certificate is at most this.
pub const CERTIFICATE_TOL: f64 = 1e-8;

const MAX_NEWTON_STEPS: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub enum OracleProblem {
    SingleStep {
        mu0: Marginal,
        mu1: Marginal,
        transition: TransitionModel,
    },
    Chain {
        mu0: Marginal,
        mu_t: Marginal,
        transition: TransitionModel,
        horizon: usize,
    },
    Hmm(ProblemInstance),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    PathSpaceNewton,
    Enumeration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Largest constraint violation relative to the total mass.
    pub max_violation: f64,
    /// Primal minus dual objective relative to `max(1, |objective|)`.
    pub duality_gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleArgmin {
    Continuous {
        /// `μ₀ … μ_T`.
        marginals: Vec<Marginal>,
        transfer_plans: Vec<TransferPlan>,
        observation_plans: Vec<Vec<ObservationPlan>>,
    },
    IntegerPlan {
        plan: Vec<Vec<u64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// KL objective for the convex programs, log-likelihood for enumeration.
    pub objective: f64,
    pub argmin: OracleArgmin,
    pub method: OracleMethod,
    pub certificate: Certificate,
}

impl OracleResult {
    pub fn marginals(&self) -> Option<&[Marginal]> {
        match &self.argmin {
            OracleArgmin::Continuous { marginals, .. } => Some(marginals),
            OracleArgmin::IntegerPlan { .. } => None,
        }
    }
}

/// Paths with positive prior weight and admissible labels. `rows[p]`
/// lists, for path `p`, its constraint row in every group.
struct PathSpace {
    n: usize,
    horizon: usize,
    sensor_dims: Vec<usize>,
    states: Vec<Vec<usize>>,
    symbols: Vec<Vec<usize>>,
    log_prior: Vec<f64>,
    rows: Vec<Vec<usize>>,
    targets: Vec<f64>,
    first_group_rows: usize,
    mass: f64,
}

#[derive(Clone, Copy)]
enum Slot {
    /// Zero target: paths through this label are dropped.
    Excluded,
    /// Implied by the total mass, which group 0 already fixes.
    Implied,
    Row(usize),
}

struct Groups {
    slot: Vec<Vec<Slot>>,
    targets: Vec<f64>,
}

impl Groups {
    /// Every group sums to the total mass, so the last positive label of
    /// each group after the first carries no extra constraint. Leaving it
    /// out keeps the dual Hessian nonsingular.
    fn new(targets: &[&Array1<f64>]) -> Self {
        let mut slot = Vec::new();
        let mut flat = Vec::new();
        for (g, t) in targets.iter().enumerate() {
            let last = t.iter().rposition(|&x| x > 0.0);
            slot.push(
                t.iter()
                    .enumerate()
                    .map(|(k, &x)| {
                        if !(x > 0.0) {
                            Slot::Excluded
                        } else if g > 0 && Some(k) == last {
                            Slot::Implied
                        } else {
                            flat.push(x);
                            Slot::Row(flat.len() - 1)
                        }
                    })
                    .collect(),
            );
        }
        Self { slot, targets: flat }
    }
}

fn odometer(digits: &mut [usize], radix: &[usize]) -> bool {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < radix[k] {
            return true;
        }
        digits[k] = 0;
    }
    false
}

impl PathSpace {
    /// Group 0 constrains `x₀`. With `endpoint`, group 1 constrains `x_T`;
    /// otherwise the observation groups follow in `(t, s)` order.
    fn build(
        mu0: &Array1<f64>,
        a: &Array2<f64>,
        horizon: usize,
        sensors: &[&Array2<f64>],
        observed: &[Vec<&Array1<f64>>],
        endpoint: Option<&Array1<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        let sensor_dims: Vec<usize> = sensors.iter().map(|b| b.ncols()).collect();
        let mut total_paths = (n as f64).powi(horizon as i32 + 1);
        for &m in &sensor_dims {
            total_paths *= (m as f64).powi(horizon as i32);
        }
        if total_paths > MAX_PATHS as f64 {
            return Err(Error::EnumerationBound(format!(
                "{total_paths} paths exceed the limit of {MAX_PATHS}"
            )));
        }
        let mut targets: Vec<&Array1<f64>> = vec![mu0];
        if let Some(end) = endpoint {
            targets.push(end);
        }
        for row in observed {
            targets.extend(row.iter().copied());
        }
        let groups = Groups::new(&targets);

        let mut space = PathSpace {
            n,
            horizon,
            sensor_dims: sensor_dims.clone(),
            states: Vec::new(),
            symbols: Vec::new(),
            log_prior: Vec::new(),
            rows: Vec::new(),
            targets: groups.targets.clone(),
            first_group_rows: groups.slot[0].iter().filter(|s| matches!(s, Slot::Row(_))).count(),
            mass: mu0.sum(),
        };

        let mut xs = vec![0; horizon + 1];
        let x_radix = vec![n; horizon + 1];
        let y_radix: Vec<usize> = (0..horizon).flat_map(|_| sensor_dims.iter().copied()).collect();
        loop {
            let mut log_w = mu0[xs[0]].ln();
            for t in 1..=horizon {
                log_w += a[[xs[t - 1], xs[t]]].ln();
            }
            let mut base = vec![groups.slot[0][xs[0]]];
            if endpoint.is_some() {
                base.push(groups.slot[1][xs[horizon]]);
            }
            if log_w > f64::NEG_INFINITY && base.iter().all(|s| !matches!(s, Slot::Excluded)) {
                let mut ys = vec![0; y_radix.len()];
                loop {
                    let mut lw = log_w;
                    let mut rows = Vec::with_capacity(1 + ys.len());
                    let mut ok = true;
                    let first_obs = 1 + usize::from(endpoint.is_some());
                    let labels = base.iter().copied().chain(ys.iter().enumerate().map(|(k, &y)| groups.slot[first_obs + k][y]));
                    for slot in labels {
                        match slot {
                            Slot::Row(r) => rows.push(r),
                            Slot::Implied => {}
                            Slot::Excluded => ok = false,
                        }
                    }
                    for (k, &y) in ys.iter().enumerate() {
                        let (t, s) = (k / sensors.len() + 1, k % sensors.len());
                        lw += sensors[s][[xs[t], y]].ln();
                    }
                    if ok && lw > f64::NEG_INFINITY {
                        space.states.push(xs.clone());
                        space.symbols.push(ys.clone());
                        space.log_prior.push(lw);
                        space.rows.push(rows);
                    }
                    if !odometer(&mut ys, &y_radix) {
                        break;
                    }
                }
            }
            if !odometer(&mut xs, &x_radix) {
                break;
            }
        }
        if space.states.is_empty() {
            return Err(Error::Infeasible("no path is compatible with the constraints".into()));
        }
        Ok(space)
    }

    fn exponents(&self, lambda: &DVector<f64>) -> Vec<f64> {
        self.log_prior
            .iter()
            .zip(&self.rows)
            .map(|(lr, rows)| lr + rows.iter().map(|&r| lambda[r]).sum::<f64>() - 1.0)
            .collect()
    }

    fn violation(&self, lambda: &DVector<f64>) -> f64 {
        let mut grad = self.targets.clone();
        for (rows, e) in self.rows.iter().zip(self.exponents(lambda)) {
            let q = e.exp();
            for &i in rows {
                grad[i] -= q;
            }
        }
        grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) / self.mass
    }

    fn dual(&self, lambda: &DVector<f64>) -> f64 {
        let linear: f64 = self.targets.iter().zip(lambda.iter()).map(|(b, l)| b * l).sum();
        let mass: f64 = self.exponents(lambda).iter().map(|e| e.exp()).sum();
        linear - mass
    }

    /// Newton ascent on the dual; returns the path weights.
    fn solve(&self) -> Result<(Vec<f64>, Certificate)> {
        let r = self.targets.len();
        let mut lambda = DVector::zeros(r);
        for row in 0..self.first_group_rows {
            lambda[row] = 1.0;
        }
        let mut value = self.dual(&lambda);
        let mut iterations = 0;
        let mut stalled = false;
        loop {
            let q: Vec<f64> = self.exponents(&lambda).iter().map(|e| e.exp()).collect();
            let mut grad = DVector::from_column_slice(&self.targets);
            let mut hess = DMatrix::zeros(r, r);
            for (p, rows) in self.rows.iter().enumerate() {
                for &i in rows {
                    grad[i] -= q[p];
                    for &j in rows {
                        hess[(i, j)] += q[p];
                    }
                }
            }
            let violation = grad.amax() / self.mass;
            if violation <= 1e-13 || stalled || iterations >= MAX_NEWTON_STEPS {
                let primal: f64 = q
                    .iter()
                    .zip(&self.log_prior)
                    .filter(|(&x, _)| x > 0.0)
                    .map(|(&x, lr)| x * (x.ln() - lr))
                    .sum();
                let cert = Certificate {
                    max_violation: violation,
                    duality_gap: (primal - value).abs() / primal.abs().max(1.0),
                    iterations,
                };
                if cert.max_violation <= CERTIFICATE_TOL && cert.duality_gap <= CERTIFICATE_TOL {
                    return Ok((q, cert));
                }
                return Err(Error::NotConverged {
                    iterations,
                    residual: violation,
                    trace: vec![value],
                });
            }
            let ridge = 1e-13 * (0..r).map(|i| hess[(i, i)]).fold(0.0, f64::max);
            for i in 0..r {
                hess[(i, i)] += ridge;
            }
            let step = hess
                .cholesky()
                .ok_or_else(|| Error::Infeasible("singular dual Hessian".into()))?
                .solve(&grad);
            let slope = grad.dot(&step);
            let mut alpha = 1.0;
            loop {
                let trial = &lambda + alpha * &step;
                let v = self.dual(&trial);
                // Close to the optimum the dual gain falls below the rounding
                // of its value; a full step that halves the violation is
                // taken regardless.
                let accept = v.is_finite()
                    && (v >= value + 1e-4 * alpha * slope
                        || (alpha == 1.0 && self.violation(&trial) <= 0.5 * violation));
                if accept {
                    lambda = trial;
                    value = v;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-20 {
                    stalled = true;
                    break;
                }
            }
            iterations += 1;
        }
    }

    fn marginals(&self, q: &[f64]) -> Vec<Marginal> {
        (0..=self.horizon)
            .map(|t| {
                let mut m = Array1::zeros(self.n);
                for (p, xs) in self.states.iter().enumerate() {
                    m[xs[t]] += q[p];
                }
                Marginal::new(m).expect("path weights are nonnegative")
            })
            .collect()
    }

    fn transfer_plans(&self, q: &[f64]) -> Vec<TransferPlan> {
        (1..=self.horizon)
            .map(|t| {
                let mut m = Array2::zeros((self.n, self.n));
                for (p, xs) in self.states.iter().enumerate() {
                    m[[xs[t - 1], xs[t]]] += q[p];
                }
                TransferPlan { time_index: t, flow: m }
            })
            .collect()
    }

    fn observation_plans(&self, q: &[f64]) -> Vec<Vec<ObservationPlan>> {
        let sensors = self.sensor_dims.len();
        (1..=self.horizon)
            .map(|t| {
                (0..sensors)
                    .map(|s| {
                        let mut d = Array2::zeros((self.n, self.sensor_dims[s]));
                        let k = (t - 1) * sensors + s;
                        for (p, xs) in self.states.iter().enumerate() {
                            d[[xs[t], self.symbols[p][k]]] += q[p];
                        }
                        ObservationPlan {
                            time_index: t,
                            sensor_index: s,
                            assignment: d,
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Solves a bridge or flow-estimation program to certificate tolerance
/// without using the scaling solvers.
pub fn generic_kl_solver(problem: &OracleProblem) -> Result<OracleResult> {
    let space = match problem {
        OracleProblem::SingleStep { mu0, mu1, transition } => chain_space(mu0, mu1, transition, 1)?,
        OracleProblem::Chain {
            mu0,
            mu_t,
            transition,
            horizon,
        } => chain_space(mu0, mu_t, transition, *horizon)?,
        OracleProblem::Hmm(instance) => {
            ensure_valid(instance)?;
            let sensors: Vec<&Array2<f64>> = instance.sensors.iter().map(|s| s.kernel()).collect();
            let observed: Vec<Vec<&Array1<f64>>> = instance
                .observations
                .iter()
                .map(|row| row.iter().map(|o| &o.counts).collect())
                .collect();
            PathSpace::build(
                instance.prior.mass(),
                instance.transition.kernel(),
                instance.horizon,
                &sensors,
                &observed,
                None,
            )?
        }
    };
    let (q, certificate) = space.solve()?;
    let marginals = space.marginals(&q);
    let transfer_plans = space.transfer_plans(&q);
    let observation_plans = space.observation_plans(&q);
    let objective = q
        .iter()
        .zip(&space.log_prior)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, lr)| x * (x.ln() - lr))
        .sum();
    Ok(OracleResult {
        objective,
        argmin: OracleArgmin::Continuous {
            marginals,
            transfer_plans,
            observation_plans,
        },
        method: OracleMethod::PathSpaceNewton,
        certificate,
    })
}

fn chain_space(mu0: &Marginal, mu_t: &Marginal, a: &TransitionModel, horizon: usize) -> Result<PathSpace> {
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    crate::matrix::ensure_len("oracle initial marginal", a.n(), mu0.len())?;
    crate::matrix::ensure_len("oracle final marginal", a.n(), mu_t.len())?;
    PathSpace::build(mu0.mass(), a.kernel(), horizon, &[], &[], Some(mu_t.mass()))
}

/// Exact maximum-likelihood integer transfer plan from `prior` to
/// `target`, by lexicographic enumeration of the plans with the given row
/// and column sums. Ties keep the first plan found.
pub fn brute_force_ml_plan(prior: &Marginal, transition: &TransitionModel, target: &Marginal) -> Result<OracleResult> {
    let n = transition.n();
    crate::matrix::ensure_len("enumeration prior", n, prior.len())?;
    crate::matrix::ensure_len("enumeration target", n, target.len())?;
    if n > ENUMERATION_MAX_STATES || prior.total() > ENUMERATION_MAX_PARTICLES {
        return Err(Error::EnumerationBound(format!(
            "enumeration handles n ≤ {ENUMERATION_MAX_STATES} and N ≤ {ENUMERATION_MAX_PARTICLES}, got n = {n}, N = {}",
            prior.total()
        )));
    }
    if !prior.is_integral() || !target.mass().iter().all(|&x| is_integral(x)) {
        return Err(Error::Precondition("enumeration needs integer marginals".into()));
    }
    if prior.total() != target.total() {
        return Err(Error::EmptyFeasibleSet);
    }
    let rows: Vec<u64> = prior.mass().iter().map(|&x| x as u64).collect();
    let cols: Vec<u64> = target.mass().iter().map(|&x| x as u64).collect();
    let allowed = transition.kernel().mapv(|a| a > 0.0);

    let mut best: Option<(f64, Array2<f64>)> = None;
    let mut count = 0;
    let mut plan = Array2::zeros((n, n));
    let mut visit = |plan: &Array2<f64>| -> Result<()> {
        count += 1;
        let tp = TransferPlan {
            time_index: 1,
            flow: plan.clone(),
        };
        let l = log_transfer_likelihood(prior, transition, &tp)?;
        if best.as_ref().map_or(true, |(b, _)| l > *b) {
            best = Some((l, plan.clone()));
        }
        Ok(())
    };
    enumerate(0, 0, &rows, &mut cols.clone(), rows[0], &allowed, &mut plan, &mut visit)?;

    let (log_likelihood, plan) = best.ok_or(Error::EmptyFeasibleSet)?;
    Ok(OracleResult {
        objective: log_likelihood,
        argmin: OracleArgmin::IntegerPlan {
            plan: plan.outer_iter().map(|r| r.iter().map(|&x| x as u64).collect()).collect(),
        },
        method: OracleMethod::Enumeration,
        certificate: Certificate {
            max_violation: 0.0,
            duality_gap: 0.0,
            iterations: count,
        },
    })
}

/// Fills `plan[i][j..]` with `left` units of row `i`, then moves on to the
/// next row. Entries are tried in decreasing size, so plans come out in
/// decreasing lexicographic order. A branch is cut as soon as the rest of
/// the row cannot be placed.
#[allow(clippy::too_many_arguments)]
fn enumerate(
    i: usize,
    j: usize,
    rows: &[u64],
    cols: &mut [u64],
    left: u64,
    allowed: &Array2<bool>,
    plan: &mut Array2<f64>,
    visit: &mut dyn FnMut(&Array2<f64>) -> Result<()>,
) -> Result<()> {
    let n = rows.len();
    if j == n {
        if left > 0 {
            return Ok(());
        }
        if i + 1 == n {
            return visit(plan);
        }
        return enumerate(i + 1, 0, rows, cols, rows[i + 1], allowed, plan, visit);
    }
    let tail_capacity: u64 = (j + 1..n).filter(|&k| allowed[[i, k]]).map(|k| cols[k]).sum();
    let hi = if allowed[[i, j]] { left.min(cols[j]) } else { 0 };
    let lo = left.saturating_sub(tail_capacity);
    if lo > hi {
        return Ok(());
    }
    for x in (lo..=hi).rev() {
        plan[[i, j]] = x as f64;
        cols[j] -= x;
        enumerate(i, j + 1, rows, cols, left - x, allowed, plan, visit)?;
        cols[j] += x;
    }
    plan[[i, j]] = 0.0;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObservationModel;
    use ndarray::array;

    #[test]
    fn ml_plan_for_sticky_chain_is_identity() {
        let a = TransitionModel::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let mu = Marginal::new(array![1.0, 1.0]).unwrap();
        let r = brute_force_ml_plan(&mu, &a, &mu).unwrap();
        assert_eq!(r.argmin, OracleArgmin::IntegerPlan { plan: vec![vec![1, 0], vec![0, 1]] });
        assert!((r.objective - 0.81f64.ln()).abs() < 1e-12);
        assert_eq!(r.certificate.iterations, 2);
    }

    #[test]
    fn ml_plan_unreachable_target() {
        let a = TransitionModel::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let r = brute_force_ml_plan(
            &Marginal::new(array![2.0, 0.0]).unwrap(),
            &a,
            &Marginal::new(array![0.0, 2.0]).unwrap(),
        );
        assert!(matches!(r, Err(Error::EmptyFeasibleSet)));
    }

    #[test]
    fn enumeration_counts_all_tables() {
        // 3×3 tables with margins (2,2,2): 21 of them
        let a = TransitionModel::from_rows(&[vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3]]).unwrap();
        let mu = Marginal::new(array![2.0, 2.0, 2.0]).unwrap();
        let r = brute_force_ml_plan(&mu, &a, &mu).unwrap();
        assert_eq!(r.certificate.iterations, 21);
    }

    #[test]
    fn enumeration_bound_enforced() {
        let a = TransitionModel::identity(5);
        let mu = Marginal::new(array![1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(brute_force_ml_plan(&mu, &a, &mu), Err(Error::EnumerationBound(_))));
    }

    #[test]
    fn prior_consistent_bridge_costs_nothing() {
        let a = TransitionModel::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let mu0 = Marginal::new(array![1.0, 2.0]).unwrap();
        let mu1 = Marginal::new(a.kernel().t().dot(mu0.mass())).unwrap();
        let r = generic_kl_solver(&OracleProblem::SingleStep { mu0, mu1, transition: a }).unwrap();
        assert!(r.objective.abs() < 1e-12);
        assert!(r.certificate.max_violation <= CERTIFICATE_TOL);
    }

    #[test]
    fn two_by_two_bridge_matches_grid_refinement() {
        let a = TransitionModel::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let mu0 = Marginal::new(array![1.0, 1.0]).unwrap();
        let mu1 = Marginal::new(array![0.6, 1.4]).unwrap();
        let r = generic_kl_solver(&OracleProblem::SingleStep {
            mu0,
            mu1,
            transition: a,
        })
        .unwrap();
        // M = [[x, 1−x], [0.6−x, 0.4+x]], x ∈ [0, 0.6]
        let f = |x: f64| {
            let terms = [(x, 0.9), (1.0 - x, 0.1), (0.6 - x, 0.1), (0.4 + x, 0.9)];
            terms.iter().map(|&(m, p): &(f64, f64)| if m > 0.0 { m * (m / p).ln() } else { 0.0 }).sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0, 0.6);
        for _ in 0..200 {
            let (x1, x2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if f(x1) < f(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        assert!((r.objective - f(0.5 * (lo + hi))).abs() < 1e-8);
    }

    #[test]
    fn hmm_oracle_satisfies_its_constraints() {
        let prior = Marginal::new(array![2.0, 1.0]).unwrap();
        let a = TransitionModel::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let b = ObservationModel::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let inst = ProblemInstance::single_sensor(prior, a, b, vec![array![1.0, 2.0], array![2.5, 0.5]]);
        let r = generic_kl_solver(&OracleProblem::Hmm(inst)).unwrap();
        let OracleArgmin::Continuous { observation_plans, marginals, .. } = &r.argmin else {
            panic!()
        };
        let cols = crate::matrix::col_sums(&observation_plans[1][0].assignment);
        assert!((cols[0] - 2.5).abs() < 1e-10);
        assert_eq!(marginals.len(), 3);
        assert!(r.certificate.duality_gap <= CERTIFICATE_TOL);
    }

    #[test]
    fn oversized_path_space_is_refused() {
        let n = 8;
        let a = TransitionModel::renormalized(Array2::ones((n, n))).unwrap();
        let mu = Marginal::uniform(n, 8.0);
        let r = generic_kl_solver(&OracleProblem::Chain {
            mu0: mu.clone(),
            mu_t: mu,
            transition: a,
            horizon: 8,
        });
        assert!(matches!(r, Err(Error::EnumerationBound(_))));
    }
}
