use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the tracking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("layer `{layer}`: {message}")]
    Layer { layer: String, message: String },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("checksum mismatch: expected {expected:08x}, found {actual:08x}")]
    Checksum { expected: u32, actual: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tracker initialization failed: {0}")]
    Init(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn layer(layer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Layer {
            layer: layer.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by inputs (files, datasets, settings) rather than
    /// by the computation itself.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Data(_)
                | Error::Config(_)
                | Error::Io { .. }
                | Error::Image { .. }
                | Error::Json { .. }
                | Error::Manifest(_)
                | Error::Checksum { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
