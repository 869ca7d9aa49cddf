//! Experiment orchestration: configs, parallel trials and sweeps, MNIST
//! feature pipelines, and the files they emit.

pub mod config;
pub mod experiment;
pub mod features;
pub mod format;
pub mod mnist;
pub mod readout;

pub use config::{ExperimentConfig, ExperimentKind, ExtractorKind, SweepParam, SweepSpec};
pub use experiment::{emit, run_experiment, ExperimentResult, Summary, TrialMetrics, TrialOutcome};
