//! Scenario files, the episode runner and its outputs.

mod config;
mod output;
mod runner;

pub use config::{
    load_scenario, load_scenario_file, load_scenario_in, ConfigError, MaskSpec, OutputOptions,
    ScenarioConfig, ToolSpec, TrajectorySpec, DEFAULT_HOME,
};
pub use output::{
    format_real, frame_path, percentile, round_sig9, write_frame, write_outputs, MetricsLog,
    MetricsRow, RunSummary, METRICS_HEADER,
};
pub use runner::{run_scenario, run_scenario_with, Simulation, LOST_GRACE_TICKS};

use thiserror::Error;

use crate::face::FaceError;
use crate::mapping::MappingError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("face model: {0}")]
    Face(#[from] FaceError),
    #[error("mask: {0}")]
    Mapping(#[from] MappingError),
    #[error("metrics line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}
