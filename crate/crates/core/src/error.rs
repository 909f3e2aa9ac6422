use thiserror::Error;

use crate::problem::ValidationReport;

/// Errors raised by problem construction and probability queries.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("malformed problem file: {0}")]
    Parse(String),
    #[error("problem failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("invalid information structure: {0}")]
    InvalidJoint(String),
    #[error("invalid scoring rule: {0}")]
    InvalidRule(String),
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
    #[error("state {0} has zero prior mass; its likelihood is undefined")]
    ZeroMassState(usize),
    #[error("signal {0} has zero probability; its posterior is undefined")]
    ZeroMassSignal(usize),
}
