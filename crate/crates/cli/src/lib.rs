//! Configuration, presets and output for grid-game experiments.

pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;

pub use config::{ExperimentConfig, SeedSpec, SnapshotSchedule, SweepSpec};
pub use experiment::Controller;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Core(#[from] gridgame::Error),
    #[error("controller failed: {0}")]
    Control(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
