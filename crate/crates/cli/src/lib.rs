//! Configuration-driven experiment runner for the Schwarz preconditioners.

pub mod config;
pub mod run;

pub use config::ExperimentConfig;
pub use run::{run_experiment, run_ramp, write_artifacts, RampRow, RunOutcome};
