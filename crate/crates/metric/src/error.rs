use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("row {row}: {msg}")]
    Value { row: usize, msg: String },
    #[error("duplicate ground truth for image `{image_id}`, fruit `{fruit_id}`")]
    DuplicateKey { image_id: String, fruit_id: String },
    #[error("unsupported format: {0}")]
    Format(String),
    #[error("raster is {}x{}, expected {}x{}", found.0, found.1, expected.0, expected.1)]
    Dimension { expected: (u32, u32), found: (u32, u32) },
    #[error("backend failed on image `{image_id}`: {msg}")]
    Backend { image_id: String, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("nothing to process: {0}")]
    EmptyInput(String),
    #[error("every image failed: {0}")]
    AllFailed(String),
    #[error(transparent)]
    Core(#[from] fruitlet_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Schema(_) => 2,
            Self::EmptyInput(_) => 3,
            Self::AllFailed(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
