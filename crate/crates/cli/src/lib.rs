//! Experiment runner and instance tooling for the `rbai` library.

pub mod config;
pub mod error;
pub mod experiment;
pub mod inspect;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, CellSummary, ExperimentOutput, ResultRow, Summary, CSV_HEADER};
