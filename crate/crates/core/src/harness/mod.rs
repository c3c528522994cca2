//! Configuration, reports, the acceptance suite and the command line.

pub mod cli;
pub mod config;
pub mod report;
pub mod verify;

pub use cli::run_cli;
pub use config::{load_config, ExperimentConfig, Mode, Normalizer, Overrides};
pub use report::{write_report, Report, Verdict};
