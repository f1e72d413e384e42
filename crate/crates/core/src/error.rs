use thiserror::Error;

use crate::nlp::SolveStatus;

/// Errors raised while building, transcribing or solving a problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite dynamics evaluation at node {node}")]
    NonFiniteDynamics { node: usize },

    #[error("non-finite value for objective {index}")]
    NonFiniteObjective { index: usize },

    #[error("delay {delay} is not an integer multiple of the step {step}")]
    DelayNotAligned { delay: f64, step: f64 },

    #[error("delays are not supported with a free terminal time")]
    DelayWithFreeHorizon,

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("the solver did not return multipliers for the defect constraints")]
    MissingMultipliers,

    #[error("scalarized solve failed at weights {weights:?} with status {status:?}")]
    SolveFailed {
        weights: Vec<f64>,
        status: SolveStatus,
    },

    #[error("degenerate front: essential interval [{w0}, {wf}] is empty")]
    DegenerateFront { w0: f64, wf: f64 },

    #[error("switching function normalization is singular (mean lambda_3 = {0})")]
    SingularNormalization(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
