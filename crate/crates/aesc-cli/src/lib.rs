//! Experiment harness: configuration-driven training, SNR x compression
//! sweeps with baselines, CSV results and report rendering.

pub mod baselines;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] aesc_core::data::DataError),
    #[error(transparent)]
    Model(#[from] aesc_core::models::ModelError),
    #[error(transparent)]
    Train(#[from] aesc_core::training::TrainError),
    #[error(transparent)]
    Phy(#[from] aesc_core::phy::PhyError),
    #[error(transparent)]
    Metric(#[from] aesc_core::metrics::MetricError),
    #[error("report: {0}")]
    Report(String),
    #[error("external codec unavailable: {0}")]
    CodecUnavailable(String),
}

impl HarnessError {
    /// Process exit code: 1 usage, 2 data/environment, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Model(aesc_core::models::ModelError::BadZDims(..)) => 1,
            HarnessError::Train(aesc_core::training::TrainError::Diverged { .. }) => 3,
            _ => 2,
        }
    }
}
