use thiserror::Error;

#[derive(Debug, Error)]
pub enum AceError {
    #[error("direction undefined: zero vector")]
    ZeroVector,
    #[error("zero distance between atoms {0} and {1}")]
    ZeroDistance(usize, usize),
    #[error("periodic configuration requires a cell")]
    MissingCell,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("frame {frame}: {msg}")]
    Parse { frame: usize, msg: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("tuple is not ordered: {0}")]
    Unordered(String),
    #[error("missing coupling block for {0}")]
    MissingBlock(String),
    #[error("imaginary residual {0:e} exceeds tolerance")]
    ImaginaryResidual(f64),
    #[error("distance transform is not strictly monotone on [r0, r_cut]: {0}")]
    NonMonotone(String),
    #[error("measure has zero mass")]
    ZeroMass,
    #[error("convention fingerprint mismatch: expected {expected:?}, found {found:?}")]
    Fingerprint { expected: String, found: String },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("missing leaf value for one-particle index {0}")]
    MissingLeaf(usize),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("species mismatch: {0}")]
    Species(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AceError>;

impl AceError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        AceError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
