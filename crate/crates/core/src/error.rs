use ifr_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IfrError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported file version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("degenerate point cloud: {0}")]
    DegeneratePointCloud(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unsatisfiable layout: {0}")]
    Unsatisfiable(String),
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("object index {index} out of range for {n} objects")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("every object has already been interacted with")]
    Exhausted,
    #[error("duplicate scene id `{0}`")]
    DuplicateSceneId(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("method `{0}` needs a checkpoint")]
    MissingCheckpoint(String),
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
}

impl From<serde_json::Error> for IfrError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_eof() {
            IfrError::Truncated(e.to_string())
        } else {
            IfrError::Format(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, IfrError>;
