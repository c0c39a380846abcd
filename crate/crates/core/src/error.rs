use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: (usize, usize), actual: (usize, usize) },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("checkpoint checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("failed to decode or encode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: ::image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
