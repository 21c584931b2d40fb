use thiserror::Error;

use crate::params::FeasibilityReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("{op}: argument outside domain ({detail})")]
    Domain { op: &'static str, detail: String },

    #[error("best-response conditions violated: {0}")]
    Infeasible(FeasibilityReport),

    #[error("share equation has no root on the open unit interval")]
    NoShareRoot,

    #[error("bisection did not converge after {steps} steps")]
    NonConvergence { steps: usize },

    #[error("sampling `{field}` exhausted {attempts} attempts without satisfying its bounds")]
    SamplingExhausted { field: &'static str, attempts: u64 },

    #[error("invalid sweep or population spec: {0}")]
    InvalidSpec(String),

    #[error("scenario runs do not share the same population: {0}")]
    MismatchedPopulation(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> ModelError {
    ModelError::Domain {
        op,
        detail: detail.into(),
    }
}
