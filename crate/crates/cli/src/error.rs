use mpsched_core::{LpError, ModelError, SimError, StochasticError};
use thiserror::Error;

/// Process-level failure classes; each maps to a documented exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unusable scenario or flags (exit 1).
    #[error("{0}")]
    Config(String),
    /// The requested constraints admit no assignment (exit 2).
    #[error("{0}")]
    Infeasible(String),
    /// Numerical or internal failure (exit 3).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LpError> for CliError {
    fn from(e: LpError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<StochasticError> for CliError {
    fn from(e: StochasticError) -> Self {
        match e {
            StochasticError::Model(m) => m.into(),
            StochasticError::NotGamma(_)
            | StochasticError::ShapeBelowOne { .. }
            | StochasticError::NeedsTwoAttempts(_) => CliError::Config(e.to_string()),
            StochasticError::BadStep(_) | StochasticError::PlateauFragmented { .. } => {
                CliError::Internal(e.to_string())
            }
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(m) => m.into(),
            SimError::BadFactor(_) => CliError::Config(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}
