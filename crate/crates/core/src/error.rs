use std::path::PathBuf;

use crate::grid::LandmarkId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("landmark ({col}, {row}) is outside the {cols}x{rows} grid")]
    OutOfBounds {
        col: i64,
        row: i64,
        cols: usize,
        rows: usize,
    },

    #[error("invalid call: {0}")]
    InvalidCall(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("unsupported format version: expected {expected}, found {found}")]
    Version { expected: String, found: String },

    #[error("incomplete policy: no action for landmark {0}")]
    IncompletePolicy(LandmarkId),

    #[error("image too small: {width}x{height}, detector needs at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("insufficient data: need at least {needed} correspondences, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("value iteration did not converge within {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("policy inconsistency: action {action} at {at} leads off the grid")]
    PolicyInconsistency { at: LandmarkId, action: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (configuration, file format)
    /// rather than by the computation itself.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
