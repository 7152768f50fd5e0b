//! Monte Carlo harness for the shape-matrix estimators in `coca`.
//!
//! An [`ExperimentConfig`] describes a target, a structure, a texture law and
//! a grid of sample sizes; [`run_experiment`] draws `trials` sample sets per
//! grid point, runs the selected estimators and aggregates trace-aligned
//! squared errors into a [`ResultTable`].

mod config;
mod emit;
mod experiment;
pub mod selftest;

pub use config::{ErrorMetric, EstimatorKind, ExperimentConfig, ResolvedTarget, Target, PRESETS};
pub use emit::{emit, to_csv, to_json, OutputFormat, CSV_HEADER};
pub use experiment::{
    run_experiment, squared_error, trial_samples, Cell, ResultTable, TableMetadata, TrialOutcome,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] coca::Error),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}
