//! JSON documents read by the solver subcommands.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::matrix;
use crate::model::{Marginal, TransferPlan, TransitionModel};

pub const BRIDGE_SCHEMA: &str = "ensemble-flow/bridge-input/v1";
pub const ML_PLAN_SCHEMA: &str = "ensemble-flow/ml-plan-input/v1";
pub const LIKELIHOOD_SCHEMA: &str = "ensemble-flow/likelihood-input/v1";

fn bridge_schema() -> String {
    BRIDGE_SCHEMA.to_string()
}
fn ml_plan_schema() -> String {
    ML_PLAN_SCHEMA.to_string()
}
fn likelihood_schema() -> String {
    LIKELIHOOD_SCHEMA.to_string()
}
fn one() -> usize {
    1
}

/// Endpoint marginals of a bridge over `horizon` steps of `transition`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeInput {
    #[serde(default = "bridge_schema")]
    pub schema: String,
    pub mu0: Marginal,
    pub mu_t: Marginal,
    pub transition: TransitionModel,
    #[serde(default = "one")]
    pub horizon: usize,
}

/// Integer prior and target for the most likely integer plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlPlanInput {
    #[serde(default = "ml_plan_schema")]
    pub schema: String,
    pub prior: Marginal,
    pub transition: TransitionModel,
    pub target: Marginal,
}

/// An integer transfer plan scored against `prior` and `transition`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodInput {
    #[serde(default = "likelihood_schema")]
    pub schema: String,
    pub prior: Marginal,
    pub transition: TransitionModel,
    #[serde(with = "matrix::nested")]
    pub plan: Array2<f64>,
}

impl LikelihoodInput {
    pub fn transfer_plan(&self) -> TransferPlan {
        TransferPlan {
            time_index: 1,
            flow: self.plan.clone(),
        }
    }
}
