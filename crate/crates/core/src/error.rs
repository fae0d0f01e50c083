use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("tag scheme error: {0}")]
    Scheme(String),
    #[error("operation requires a label attention model, got {0}")]
    UnsupportedArch(String),
    #[error("model file: {0}")]
    Load(#[from] LoadError),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
    #[error("gradient check: function is not deterministic ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("bad magic header {0:?}")]
    Magic(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("file truncated while reading {0}")]
    Truncated(String),
    #[error("tensor {name}: stored shape {found:?} does not match model shape {expected:?}")]
    ShapeMismatch {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
