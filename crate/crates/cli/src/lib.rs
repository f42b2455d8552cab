//! Configuration, dispatch and artifact writing for the `subquantum` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, preset, ConfigError, Experiment, ExperimentConfig, Issue, Threads, PRESETS};
pub use run::{headline, run_experiment, RunError, RunSummary, SCHEMA_VERSION};
