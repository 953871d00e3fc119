//! Experiment driver for determinantal medium-access scheduling: network
//! generation, scheduler comparison, oracle verification and kernel sampling.

pub mod compare;
pub mod config;
pub mod error;
pub mod gen;
pub mod sample;
pub mod verify;

pub use config::{ExperimentConfig, Overrides, SchedulerKind};
pub use error::{CliError, CliResult};
