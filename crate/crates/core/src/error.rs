use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("moment generating function is not finite at alpha = {alpha} for {distribution}")]
    MgfUndefined { distribution: String, alpha: f64 },

    #[error("quadrature failed at x = {x}, u = {u}: {reason}")]
    QuadratureFailure { x: f64, u: f64, reason: String },

    #[error("penalty returned {value} at ({surplus}, {deficit}), outside [0, {bound}]")]
    PenaltyOutOfBounds {
        surplus: f64,
        deficit: f64,
        value: f64,
        bound: f64,
    },

    #[error("simulation produced a non-finite state: {0}")]
    Simulation(String),

    #[error("policy evaluation failed at nodes {nodes:?}: {reason}")]
    Evaluation { nodes: Vec<usize>, reason: String },

    #[error("no adjustment coefficient: {0} has no finite moment generating function")]
    NoAdjustmentCoefficient(String),

    #[error("no positive root of the Lundberg equation at u = {u}: {reason}")]
    NoPositiveRoot { u: f64, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
