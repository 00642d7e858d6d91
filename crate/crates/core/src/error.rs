use thiserror::Error;

use crate::scenario::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("invalid scenario: {}", format_violations(.0))]
    InvalidScenario(Vec<Violation>),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("riccati iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    DareNonConvergence { iterations: usize, residual: f64 },

    #[error("no sign change of the power equation found in [{lo:e}, {hi:e}] W")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("training diverged at episode {episode}, step {step}: {reason}")]
    Divergence {
        episode: usize,
        step: usize,
        reason: String,
    },

    #[error("value iteration did not converge after {sweeps} sweeps (max change {max_change:e})")]
    ValueIterationNonConvergence { sweeps: usize, max_change: f64 },

    #[error("slot budget of {budget} exceeded: {context}")]
    SlotBudgetExceeded { budget: u64, context: String },

    #[error("malformed weight file: {0}")]
    Weights(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("{}: {}", v.field, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
