use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unknown outcome label `{0}`")]
    UnknownLabel(String),

    #[error("outcome `{label}` has probability {probability:e}, cannot collapse onto it")]
    ZeroProbabilityOutcome { label: String, probability: f64 },

    /// The post-selected outcome cannot occur once the intermediate measurement is performed.
    #[error("post-selection `{label}` is impossible with the intermediate measurement in place (total weight {weight:e})")]
    ImpossiblePostSelection { label: String, weight: f64 },

    /// No Monte Carlo trial matched the requested final outcome.
    #[error("no trial out of {trials} ended in `{condition}`")]
    EmptySelection { condition: String, trials: u64 },

    #[error("label sets differ: {0}")]
    LabelMismatch(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("invalid counterfactual statement: {0}")]
    InvalidStatement(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),

    #[error("trial count must be at least 1")]
    NoTrials,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
