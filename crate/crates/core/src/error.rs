use std::path::PathBuf;

use thiserror::Error;

/// Things that can go wrong anywhere in the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("index ({i}, {j}, {k}) outside grid of {nx}x{ny}x{nz} cells")]
    OutOfBounds {
        i: usize,
        j: usize,
        k: usize,
        nx: usize,
        ny: usize,
        nz: usize,
    },

    #[error("plane index {index} outside axis of length {len}")]
    PlaneOutOfBounds { index: usize, len: usize },

    /// The field contains NaN or infinite values.
    #[error("numerical blow-up detected at step {step}")]
    BlowUp { step: usize },

    #[error("field has zero norm")]
    ZeroNorm,

    #[error("potential is singular at ({x}, {y}, {z})")]
    SingularPotential { x: f64, y: f64, z: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Classical trajectory left the physically meaningful region.
    #[error("classical integration failed: {0}")]
    Trajectory(String),

    /// `line` is 1-based; 0 when the problem is not tied to a line of the
    /// input (for example a command-line override).
    #[error("{}", located(*line, message))]
    Syntax { line: usize, message: String },

    /// A scenario parsed fine but violates one of the documented rules.
    #[error("scenario rule `{rule}` violated: {detail}")]
    Validation { rule: &'static str, detail: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn located(line: usize, message: &str) -> String {
    match line {
        0 => format!("config: {message}"),
        n => format!("config line {n}: {message}"),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
