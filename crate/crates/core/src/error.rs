//! Error type shared by every module.

use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or geometries of the operands do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An input violates a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numerical procedure failed (ill-conditioning, non-convergence, divergence).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A filter or rule was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// A required artifact is not present on disk.
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    /// A cached artifact is missing; `hint` is the command that builds it.
    #[error("missing artifact {}; build it with `{hint}`", .path.display())]
    ArtifactNotBuilt { path: PathBuf, hint: String },

    /// Malformed artifact file.
    #[error("malformed artifact {}: {reason}", .path.display())]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {}: {source}", .path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path)
        } else {
            Error::Io { path, source }
        }
    }
}
