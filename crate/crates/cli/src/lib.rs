//! Sweep harness: TOML configs in, CSV rows and a JSON sidecar out.

pub mod config;
pub mod fit;
pub mod output;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] qbypass::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub use config::{BackendChoice, Experiment, SweepConfig};
pub use sweep::{run_sweep, run_sweep_with_threads, Row, SweepResult};
