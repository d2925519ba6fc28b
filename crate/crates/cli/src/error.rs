//! Process-level error classification and exit codes.

use thiserror::Error;

/// Top-level failure classes, mapped onto the process exit codes:
/// 0 success, 2 configuration error, 3 data error, 4 every step infeasible.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("no step produced a bundle (all infeasible)")]
    AllStepsInfeasible,
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) => 3,
            AppError::AllStepsInfeasible => 4,
        }
    }

    pub fn config(err: impl std::fmt::Display) -> Self {
        AppError::Config(err.to_string())
    }

    pub fn data(err: impl std::fmt::Display) -> Self {
        AppError::Data(err.to_string())
    }
}
