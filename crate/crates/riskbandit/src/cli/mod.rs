//! Command-line front end: TOML config parsing/validation, shipped presets,
//! and the experiment runner with deterministic artifact emission.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{parse_config, resolve_config, ExperimentConfig, ResolvedExperiment};
pub use presets::{preset, PRESET_NAMES};
pub use run::{run_experiment, CliError};
