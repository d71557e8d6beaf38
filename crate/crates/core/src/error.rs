use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} input: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),

    #[error("non-positive degree factor {value} at {axis} index {index}; signed data needs norm_mode l2_rows or none")]
    NonPositiveDegree {
        axis: &'static str,
        index: usize,
        value: f64,
    },

    #[error("row {0} has zero norm")]
    ZeroNormRow(usize),

    #[error("column {0} has zero variance")]
    ZeroVariance(usize),

    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("SVD did not converge")]
    SvdNonConvergence,

    #[error("invalid concept index {index} (model has {k} concepts)")]
    InvalidConcept { index: usize, k: usize },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input data or arguments, as opposed to
    /// numerical failures inside an otherwise valid computation.
    pub fn is_input(&self) -> bool {
        !matches!(
            self,
            Error::SvdNonConvergence | Error::NonPositiveDegree { .. } | Error::ZeroVariance(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
