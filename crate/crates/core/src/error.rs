use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant. `key` is the dotted path.
    #[error("configuration error: {key}: {reason}")]
    Config { key: String, reason: String },

    #[error("invalid input: {0}")]
    Input(String),

    /// A required labelled segment was absent from the calibration trace.
    #[error("calibration incomplete: {label} missing")]
    CalibrationIncomplete { label: String },

    #[error("degenerate calibration: {what} has identical min and max ({value})")]
    DegenerateCalibration { what: String, value: f64 },

    #[error("key at x = {target_x:.3} mm is out of reach (reachable x in [{min_x:.3}, {max_x:.3}] mm)")]
    Reach { target_x: f64, min_x: f64, max_x: f64 },

    #[error("travel of {travel:.3} mm exceeds the maximum drop of {max_travel:.3} mm")]
    Range { travel: f64, max_travel: f64 },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("runtime error: {0}")]
    Runtime(String),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { key: key.into(), reason: reason.into() }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), reason: reason.into() }
    }

    /// Process exit code: 2 for validation failures, 3 for runtime failures.
    /// Usage errors (1) are produced by the argument parser, not here.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Runtime(_) => 3,
            _ => 2,
        }
    }
}
