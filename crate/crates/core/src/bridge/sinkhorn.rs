//! Alternating diagonal scaling of a nonnegative kernel to prescribed
//! row and column sums.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::matrix::{scale_cols, scale_rows};

use super::feasibility::transport_feasible;

/// Result of a converged scaling: `plan = diag(row_scaling) · K · diag(col_scaling)`.
#[derive(Clone, Debug)]
pub struct Scaling {
    pub row_scaling: Array1<f64>,
    pub col_scaling: Array1<f64>,
    pub iterations: usize,
    /// ∞-norm column-sum violation relative to the total mass.
    pub residual: f64,
    /// ℓ1 column-sum violation relative to the total mass, one entry per
    /// iteration. Non-increasing for exact arithmetic.
    pub residual_trace: Vec<f64>,
}

impl Scaling {
    pub fn plan(&self, kernel: &Array2<f64>) -> Array2<f64> {
        scale_cols(&scale_rows(kernel, &self.row_scaling), &self.col_scaling)
    }
}

/// Sinkhorn–Knopp iteration. Each iteration rescales columns and then rows,
/// so row sums are exact on exit and the residual is measured on columns.
pub struct Sinkhorn<'a> {
    kernel: &'a Array2<f64>,
    rows: &'a Array1<f64>,
    cols: &'a Array1<f64>,
    tol: f64,
    max_iters: usize,
    initial: Option<Array1<f64>>,
}

impl<'a> Sinkhorn<'a> {
    pub fn new(kernel: &'a Array2<f64>, rows: &'a Array1<f64>, cols: &'a Array1<f64>) -> Self {
        Self {
            kernel,
            rows,
            cols,
            tol: 1e-9,
            max_iters: 100_000,
            initial: None,
        }
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    /// Positive starting row scaling (defaults to all ones).
    pub fn initial_scaling(mut self, init: Array1<f64>) -> Self {
        self.initial = Some(init);
        self
    }

    pub fn solve(self) -> Result<Scaling> {
        let (n, m) = self.kernel.dim();
        if self.rows.len() != n || self.cols.len() != m {
            return Err(Error::DimensionMismatch {
                context: "sinkhorn marginals".into(),
                expected: n,
                found: self.rows.len(),
            });
        }
        if !transport_feasible(self.kernel, self.rows, self.cols) {
            return Err(Error::Infeasible(
                "no plan on the kernel support matches both marginals".into(),
            ));
        }
        let total = self.rows.sum();
        let mut alpha = match self.initial {
            Some(init) if init.len() == n && init.iter().all(|&x| x > 0.0 && x.is_finite()) => init,
            Some(_) => {
                return Err(Error::Precondition(
                    "initial scaling must be a positive vector of matching length".into(),
                ))
            }
            None => Array1::ones(n),
        };
        let kt = self.kernel.t();
        let mut kt_alpha = kt.dot(&alpha);
        let mut beta = Array1::zeros(m);
        let mut trace = Vec::new();
        let mut residual = f64::INFINITY;
        for iteration in 1..=self.max_iters {
            divide_into(&mut beta, self.cols, &kt_alpha, "column")?;
            let k_beta = self.kernel.dot(&beta);
            divide_into(&mut alpha, self.rows, &k_beta, "row")?;
            kt_alpha = kt.dot(&alpha);

            let mut l1 = 0.0;
            let mut linf: f64 = 0.0;
            for j in 0..m {
                let d = (beta[j] * kt_alpha[j] - self.cols[j]).abs();
                l1 += d;
                linf = linf.max(d);
            }
            trace.push(l1 / total);
            residual = linf / total;
            if residual <= self.tol {
                return Ok(Scaling {
                    row_scaling: alpha,
                    col_scaling: beta,
                    iterations: iteration,
                    residual,
                    residual_trace: trace,
                });
            }
        }
        Err(Error::NotConverged {
            iterations: self.max_iters,
            residual,
            trace,
        })
    }
}

/// `out = target ./ denom` with `0 / anything = 0`.
fn divide_into(out: &mut Array1<f64>, target: &Array1<f64>, denom: &Array1<f64>, what: &str) -> Result<()> {
    for (k, (o, (&t, &d))) in out.iter_mut().zip(target.iter().zip(denom.iter())).enumerate() {
        *o = if t == 0.0 {
            0.0
        } else if d > 0.0 && d.is_finite() {
            t / d
        } else {
            return Err(Error::Infeasible(format!(
                "{what} {k} needs mass {t} but its scaled kernel sum is {d}"
            )));
        };
    }
    Ok(())
}
