//! Configuration, experiment harness and persistence for the `sle` command.

pub mod config;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod output;

pub use config::{load_config, parse_config, ExperimentSpec, Overrides, Resolved, RunConfig};
pub use error::CliError;
pub use experiment::{run_experiment, simulate, Outcome, Report};
pub use output::Provenance;
