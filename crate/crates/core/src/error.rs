use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the discretization, the solvers and the study driver.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("solver stopped after {iterations} iterations with relative residual {residual:e}")]
    MaxIterationsExceeded { iterations: usize, residual: f64 },
    #[error("right-hand side carries a constant component {component:e} outside the range of the singular operator")]
    IncompatibleRhs { component: f64 },
    #[error("coarsening factor {factor} does not divide {steps} steps")]
    NonDivisibleFactor { factor: usize, steps: usize },
    #[error("time step {step} failed: {source}")]
    StepFailed { step: usize, source: Box<Error> },
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("pressure-like field has discrete mean {mean:e}, expected zero")]
    NonZeroMean { mean: f64 },
    #[error("{failed} of {total} realizations failed (limit 5%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error("rate fit needs positive data, got {0}")]
    NonPositive(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps a failure inside a time-stepping loop with the offending step index.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::StepFailed { .. } => e,
            other => Error::StepFailed {
                step,
                source: Box::new(other),
            },
        }
    }

    /// Failures caused by the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::MaxIterationsExceeded { .. }
            | Error::IncompatibleRhs { .. }
            | Error::TooManyFailures { .. }
            | Error::NonZeroMean { .. } => true,
            Error::StepFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
