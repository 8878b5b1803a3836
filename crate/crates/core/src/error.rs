use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("hyperedge {hyperedge} lists node {node} more than once")]
    DuplicateNode { hyperedge: usize, node: usize },

    #[error("hyperedge {hyperedge} references node {node}, but there are only {num_nodes} nodes")]
    NodeOutOfRange {
        hyperedge: usize,
        node: usize,
        num_nodes: usize,
    },

    #[error("hyperedge {0} is empty")]
    EmptyHyperedge(usize),

    #[error("{what}: expected {expected} rows, found {found}")]
    RowCountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: `{token}` is not a number")]
    NonNumeric { line: usize, token: String },

    #[error("label {label} of node {node} is outside [0, {num_classes})")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("backward needs a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),

    #[error("the loss mask is empty")]
    EmptyMask,

    #[error("colour histories cover {0} and {1} iterations")]
    IterationMismatch(usize, usize),

    #[error("invalid edge ({u}, {v}, {w}): {reason}")]
    InvalidEdge {
        u: usize,
        v: usize,
        w: f64,
        reason: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
