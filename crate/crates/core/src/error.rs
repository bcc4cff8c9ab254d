use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or buffer widths do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument violates an operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A configuration value is out of its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Sphere-initialization fitting diverged. The per-iteration loss
    /// history up to the failure is attached.
    #[error("training diverged at iteration {iteration}: loss {loss:e} (initial {initial:e})")]
    Diverged {
        iteration: usize,
        loss: f64,
        initial: f64,
        history: Vec<f64>,
    },

    /// A consistency evaluation produced nothing to measure.
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image encoding failed for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Self::Format { path: path.into(), reason: reason.into() }
    }
}

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
