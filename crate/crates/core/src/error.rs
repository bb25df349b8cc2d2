use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("entry ({row}, {col}) is outside the declared {n_rows}x{n_cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("partition file: {0}")]
    PartitionFile(String),

    #[error("container: bad magic bytes")]
    BadMagic,

    #[error("container: unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("container: value precision tag {found} does not match requested {expected}")]
    PrecisionMismatch { expected: u32, found: u32 },

    #[error("container: truncated stream")]
    Truncated,

    #[error("container: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("container: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
