//! Experiment runner for `freelab-core`: JSON configuration, seeded
//! orchestration, CSV/JSON artifacts with a resumable manifest, and the
//! acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod runner;
pub mod table;

pub use config::{ExperimentConfig, ExperimentSpec, RunConfig};
pub use error::{HarnessError, Result};
pub use runner::{run, Format, RunOptions, RunReport};
pub use table::{Check, Table};
