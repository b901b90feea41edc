//! Config ingestion, seeded experiment runners, rate fits and report output.

mod config;
mod fit;
mod report;
mod runners;
mod selftest;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::euler1d::EulerError;
use crate::meanfield::MeanFieldError;
use crate::measures::MeasureError;

pub use config::{
    load_config, parse_config, Experiment, ExperimentConfig, DEFAULT_CFL, DEFAULT_GRID_CELLS, DEFAULT_REFINE,
    DEFAULT_TRIALS,
};
pub use fit::{fit_rate, fit_window_start, FitError, FitResult};
pub use report::{emit_report, version_string, DataFile, Manifest, ManifestEntry, Report};
pub use runners::{run_chaos, run_euler_compare, run_experiment, run_fournier, run_simulate};
pub use selftest::run_metrics_selftest;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical halt: {0}")]
    Halt(String),
}

impl ExperimentError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io { path: path.to_path_buf(), source }
    }

    fn invalid(msg: impl Into<String>) -> Self {
        ExperimentError::Validation(vec![msg.into()])
    }

    /// 2 validation, 3 numerical halt, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Validation(_) => 2,
            ExperimentError::Halt(_) => 3,
            ExperimentError::Io { .. } => 4,
        }
    }
}

impl From<DynamicsError> for ExperimentError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::NonFinite { .. } => ExperimentError::Halt(e.to_string()),
            DynamicsError::Io(source) => ExperimentError::Io { path: PathBuf::from("<stream>"), source },
            other => ExperimentError::invalid(other.to_string()),
        }
    }
}

impl From<MeasureError> for ExperimentError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Io(source) => ExperimentError::Io { path: PathBuf::from("<stream>"), source },
            other => ExperimentError::invalid(other.to_string()),
        }
    }
}

impl From<MeanFieldError> for ExperimentError {
    fn from(e: MeanFieldError) -> Self {
        match e {
            MeanFieldError::NonFinite(_) => ExperimentError::Halt(e.to_string()),
            MeanFieldError::Dynamics(d) => d.into(),
            MeanFieldError::Measure(m) => m.into(),
            other => ExperimentError::invalid(other.to_string()),
        }
    }
}

impl From<EulerError> for ExperimentError {
    fn from(e: EulerError) -> Self {
        match e {
            EulerError::Shock { .. } | EulerError::Cfl { .. } => ExperimentError::Halt(e.to_string()),
            EulerError::Dynamics(d) => d.into(),
            EulerError::MeanField(m) => m.into(),
            EulerError::Measure(m) => m.into(),
            other => ExperimentError::invalid(other.to_string()),
        }
    }
}
