use thiserror::Error;

use crate::model::Violation;

/// Errors raised by the model, solvers, simulator and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("divergence is infinite: q = 0 where p > 0 at index {index:?}")]
    SupportViolation { index: Vec<usize> },

    #[error("invalid problem instance ({} violation(s)): {}", .0.len(), summarize(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("infeasible marginals: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("degenerate support at t = {time}, index {index}: {detail}")]
    DegenerateSupport {
        time: usize,
        index: usize,
        detail: String,
    },

    #[error("cannot factor plan {time}: state {state} has zero mass")]
    ZeroMassFactorization { time: usize, state: usize },

    #[error("instance exceeds enumeration bound: {0}")]
    EnumerationBound(String),

    #[error("no integer plan satisfies the marginals on the allowed support")]
    EmptyFeasibleSet,

    #[error("network model error: {0}")]
    Model(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .take(3)
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Stable machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::SupportViolation { .. } => "support_violation",
            Error::InvalidInstance(_) => "invalid_instance",
            Error::Precondition(_) => "precondition",
            Error::Infeasible(_) => "infeasible",
            Error::NotConverged { .. } => "not_converged",
            Error::DegenerateSupport { .. } => "degenerate_support",
            Error::ZeroMassFactorization { .. } => "zero_mass_factorization",
            Error::EnumerationBound(_) => "enumeration_bound",
            Error::EmptyFeasibleSet => "empty_feasible_set",
            Error::Model(_) => "model",
            Error::Schema { .. } => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
