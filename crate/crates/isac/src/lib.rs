//! Simulation harness around `isac-core`: TOML configuration, seeded Monte
//! Carlo experiments and CSV output.

pub mod config;
pub mod error;
pub mod harness;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use harness::{run_experiment, to_csv, Experiment, ResultRow};
pub use isac_core as core;
