//! Optimal proportional reinsurance for Gerber-Shiu functions in the Cramér-Lundberg model.
//!
//! The crate evaluates expected discounted penalties at ruin for Markov retention
//! strategies, finds the optimal strategy by policy iteration on the HJB equation,
//! cross-checks values by Monte Carlo and computes asymptotically optimal constant
//! strategies from adjustment coefficients.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod evaluator;
pub mod hjb;
pub mod model;
pub mod quadrature;
pub mod simulator;

pub use error::{Error, Result};
