use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the structural checkers and model constructors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CdfError {
    #[error("invalid sample {state:?}: {reason}")]
    InvalidSample { state: Vec<f64>, reason: String },
    #[error("evaluation failed at {state:?}: {reason}")]
    Evaluation { state: Vec<f64>, reason: String },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("domain error at {state:?}: {reason}")]
    Domain { state: Vec<f64>, reason: String },
    #[error("structural assumption violated: {0}")]
    Structural(String),
}

/// Errors raised by the Markov-generator and reaction-network routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StochasticError {
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("no unique steady state; communicating classes {classes:?}")]
    Reducible { classes: Vec<Vec<usize>> },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error("step size too large at t = {time}: {reason}")]
    StepSize { time: f64, reason: String },
    #[error("discretization error: {0}")]
    Discretization(String),
    #[error("reduction failed at t = {time}: {reason}")]
    Reduction { time: f64, reason: String },
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },
}
