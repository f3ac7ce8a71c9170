//! Experiment harness behind the `masgrad-lab` binary.

pub mod bench;
pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;

pub use config::{resolve, ConfigOverlay, Experiment, ExperimentConfig};
pub use experiments::{run_experiment, RunOutcome};
