use thiserror::Error;

/// Errors produced by the model, solvers and report writers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spin value {0} is outside {{0, 1, 2}}")]
    InvalidSpin(i64),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("tree depth {depth} exceeds the supported maximum {max}")]
    DepthTooLarge { depth: usize, max: usize },

    #[error("configuration has no spin for vertex {vertex}")]
    MissingSpin { vertex: usize },

    #[error("oracle infeasible: depth {depth} needs 3^{vertices} configurations, above the 1e8 enumeration guard")]
    OracleInfeasible { depth: usize, vertices: usize },

    #[error("non-finite value while evaluating {context} (magnitude {magnitude:e})")]
    NonFinite { context: &'static str, magnitude: f64 },

    #[error("polynomial has zero leading coefficient")]
    DegeneratePolynomial,

    #[error("division by the zero polynomial")]
    DivisionByZero,

    #[error("nonzero remainder in exact division (relative norm {relative_norm:e})")]
    NonzeroRemainder { relative_norm: f64 },

    #[error("quadratic coefficient check failed: {0}")]
    CoefficientSign(&'static str),

    #[error("root isolation cross-check failed: {0}")]
    RootIsolation(String),

    #[error("malformed number {0:?}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
