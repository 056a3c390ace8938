//! Command-line front end: configuration, per-command reports and the
//! invariant suite.

pub mod commands;
pub mod config;
pub mod verify;

pub use commands::{
    cmd_ball, cmd_certify_delta, cmd_chain, cmd_cocycle, cmd_path, cmd_report, cmd_select_p, powers, ChainKind,
    Outcome,
};
pub use config::{PSetting, RunConfig};
pub use verify::cmd_verify;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cayley_lp::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Stable tag for machine-readable error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(cayley_lp::Error::Invariant(_)) => "invariant",
            CliError::Core(_) => "precondition",
            CliError::Io(_) => "io",
            CliError::Json(_) | CliError::Csv(_) => "serialization",
        }
    }
}
