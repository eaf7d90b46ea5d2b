//! Config-driven experiments over the `wgbound` core.

pub mod config;
pub mod emit;
pub mod error;
pub mod run;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
