use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid window grid: {0}")]
    Grid(String),

    #[error("index {index:?} out of range for shape {shape:?}")]
    OutOfRange { index: [usize; 4], shape: [usize; 4] },

    #[error("expected a square map, got {height}x{width}")]
    NotSquare { height: usize, width: usize },

    #[error("window size {0} must be odd and at least 3")]
    WindowSize(usize),

    #[error("LBP mode {mode} cannot be used with window size {size}")]
    ModeWindow { mode: &'static str, size: usize },

    #[error("rotation record does not match: {0}")]
    Record(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("invalid network config at layer {index}: {message}")]
    Layer { index: usize, message: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid bounding box: {0}")]
    BBox(String),

    #[error("bad magic number in {path}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },

    #[error("truncated file {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("malformed netpbm header in {path}: {detail}")]
    Netpbm { path: PathBuf, detail: String },

    #[error("manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    /// True for errors caused by the filesystem rather than by content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
