//! Projected stochastic natural-gradient variational inference over Gaussian
//! exponential families.

pub mod error;
pub mod estimators;
pub mod expfam;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod optimizer;
pub mod projections;
pub mod testing;

pub use error::{NgviError, Result};
