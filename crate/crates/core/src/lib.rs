//! Most-likely flow estimation for large ensembles of indistinguishable
//! agents moving on a hidden Markov chain and observed only in aggregate.

pub mod bridge;
pub mod divergence;
pub mod estimator;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod model;
pub mod network;
pub mod oracle;
pub mod simulate;
pub mod svg;

pub use error::{Error, Result};
