//! Experiment harness for the stable-driven McKean-Vlasov toolkit: TOML
//! configs, run records with hashed artifacts, and summary reports.

pub mod config;
pub mod error;
pub mod experiments;
pub mod record;
pub mod report;

pub use config::{load_config, load_config_with, parse_config, ExperimentConfig, ExperimentKind, Overrides};
pub use error::{CliError, ConfigIssue};
pub use experiments::run_experiment;
pub use record::{RunRecord, Status, RECORD_FILE};
pub use report::render_report;
