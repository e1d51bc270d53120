use std::path::PathBuf;

use thiserror::Error;

type Dims = (usize, usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("tensor dims {dims:?} must all be positive")]
    ZeroDimension { dims: Dims },
    #[error("data length {len} does not match dims {dims:?}")]
    DataLength { dims: Dims, len: usize },
    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Dims, dims: Dims },
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch { op: &'static str, left: Dims, right: Dims },
    #[error("cannot fold a matrix with {rows} rows into {n} frontal slices")]
    FoldShape { rows: usize, n: usize },
    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e} after inverse DFT")]
    ImaginaryResidue { residue: f64, tolerance: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("row {row} of the operator is identically zero")]
    ZeroRow { row: usize },
    #[error("invalid constraint partition: {0}")]
    Partition(String),
    #[error("invalid row paving: {0}")]
    Paving(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("operator is zero")]
    ZeroOperator,
    #[error("system is inconsistent: projected residual {residual:e}")]
    Inconsistent { residual: f64 },
    #[error("invalid generator parameters: {0}")]
    Generator(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed tensor file: {reason}")]
    TensorFile { path: PathBuf, reason: String },
    #[error("{path}: malformed trace file: {reason}")]
    TraceFile { path: PathBuf, reason: String },
    #[error("{path}: malformed image: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error("{path}:{line}: {reason}")]
    Config { path: PathBuf, line: usize, reason: String },
    #[error("rate fit: {0}")]
    Fit(String),
    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
