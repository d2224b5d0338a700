use thiserror::Error;

/// Errors produced by the identification library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: String,
        expected: String,
        found: String,
    },

    #[error("trajectory {index} is too short: need {needed} {what}, found {found}")]
    Length {
        index: usize,
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("backtracking underflow at step {step} (stepsize {stepsize:e})")]
    BacktrackUnderflow { step: usize, stepsize: f64 },

    #[error("non-finite value encountered at step {step} in {what}")]
    NonFinite { step: usize, what: &'static str },

    #[error("requested rank {requested} exceeds the attainable numerical rank {attainable}")]
    Rank { requested: usize, attainable: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(
    context: impl Into<String>,
    expected: impl std::fmt::Display,
    found: impl std::fmt::Display,
) -> Error {
    Error::Shape {
        context: context.into(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
