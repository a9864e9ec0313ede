//! Configuration, sweeps and CSV output for the relay energy-efficiency studies.

pub mod config;
pub mod output;
pub mod studies;
pub mod sweep;

/// Package version with the git description of the build tree.
pub const VERSION: &str = env!("RELAY_EE_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] relay_ee_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
