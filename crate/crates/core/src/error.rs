use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("density matrix has eigenvalue {value:e} below tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error("density matrix trace {trace} is not 1")]
    BadTrace { trace: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid subsystem index set: {0}")]
    BadIndexSet(String),

    #[error("state of {len} amplitudes exceeds the size cap {cap}")]
    SizeCapExceeded { len: usize, cap: usize },

    #[error("kernel has dimension {0}, expected 1")]
    KernelDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
