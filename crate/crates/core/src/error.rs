use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("checkpoint corrupted: {0}")]
    Corrupt(String),

    #[error("tensor `{name}` has unsupported dtype `{dtype}` (only f32 is supported)")]
    UnsupportedDtype { name: String, dtype: String },

    #[error("parameter names differ: only in left {only_left:?}, only in right {only_right:?}")]
    MissingNames {
        only_left: Vec<String>,
        only_right: Vec<String>,
    },

    #[error("shape mismatch for `{name}`: {left:?} vs {right:?}")]
    ShapeMismatch {
        name: String,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("evaluation failed at {coord}: {message}")]
    EvaluationFailed { coord: String, message: String },

    #[error("no reference record for group {0}")]
    MissingReference(String),

    #[error("reference value {value} for group {group} is not positive")]
    DegenerateReference { group: String, value: f64 },

    #[error("empty aggregation group: {0}")]
    EmptyGroup(String),

    #[error("need at least 2 seeds per coordinate, found {found} at {coord}")]
    InsufficientSeeds { coord: String, found: usize },

    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
