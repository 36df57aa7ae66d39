use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use rcmdp_core::RcmdpError;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] RcmdpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
}

/// Machine-readable error record written to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl BenchError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(e) => match e {
                RcmdpError::Structural(_) => "structural",
                RcmdpError::SingularChain(_) => "singular-chain",
                RcmdpError::InvalidModel(_) => "invalid-model",
                RcmdpError::InfeasibleSet(_) => "infeasible-set",
                RcmdpError::Divergence { .. } => "divergence",
                RcmdpError::Config(_) => "config",
                RcmdpError::NoConvergence { .. } => "no-convergence",
                RcmdpError::BudgetExceeded { .. } => "budget-exceeded",
                RcmdpError::Param(_) => "param",
            },
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse",
            Self::Config(_) => "config",
        }
    }

    /// 2 configuration or input problems, 3 critic divergence, 4 oracle
    /// non-convergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(RcmdpError::Divergence { .. }) => 3,
            Self::Core(RcmdpError::NoConvergence { .. }) => 4,
            Self::Io { .. } => 1,
            _ => 2,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}
