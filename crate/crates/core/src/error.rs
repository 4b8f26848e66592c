//! Crate error type, split by how the CLI maps failures to exit codes:
//! configuration problems are usage errors, everything else is a runtime
//! failure.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, expression or parameter value.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical routine failed to converge or produced invalid output.
    #[error("numerics error: {0}")]
    Numerics(String),

    /// The requested computation is outside the supported regime.
    #[error("unsupported regime: {0}")]
    Unsupported(String),

    /// A simulation guard tripped (population cap, window bias, horizon).
    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerics(msg: impl Into<String>) -> Self {
        Error::Numerics(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub fn simulation(msg: impl Into<String>) -> Self {
        Error::Simulation(msg.into())
    }

    /// True when the failure should surface as a usage/config error (CLI
    /// exit code 2) rather than a runtime failure (exit code 1).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
