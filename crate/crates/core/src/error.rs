use std::path::PathBuf;

/// Errors produced by the clustering library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A spectral object that should come from a real tensor is not conjugate-symmetric.
    #[error(
        "corrupted spectral slices: conjugate symmetry violated by {violation:e} at slice {slice}"
    )]
    SpectralSymmetry { slice: usize, violation: f64 },

    #[error("numerical failure in {context}{}", .index.map(|i| format!(" (index {i})")).unwrap_or_default())]
    Numerical {
        context: &'static str,
        index: Option<usize>,
    },

    /// A caller violated an operation precondition that selects a different code path.
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("dataset directory not found: {}", .0.display())]
    MissingDirectory(PathBuf),

    #[error(
        "inconsistent sample count: {first_name} has {first} samples but {other_name} has {other}"
    )]
    InconsistentSamples {
        first_name: String,
        first: usize,
        other_name: String,
        other: usize,
    },

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(
        context: &'static str,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
