use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unsupported witness layout for {0} witnesses (supported: 4, 6)")]
    UnsupportedLayout(usize),
    #[error("quorum k={k} exceeds witness count n={n}")]
    QuorumExceedsWitnesses { k: usize, n: usize },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Failures while reading the indentation-based document syntax and
/// interpreting it as a policy.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("unknown requirement kind `{0}`")]
    UnknownRequirement(String),
    #[error("threshold for {kind} out of range: {value}")]
    ThresholdOutOfRange { kind: String, value: String },
    #[error("missing quorum section")]
    MissingQuorum,
    #[error("quorum k={k} exceeds n={n}")]
    QuorumInvariant { k: usize, n: usize },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid value for `{key}`: {value}")]
    InvalidValue { key: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("input truncated")]
    Truncated,
    #[error("{0} trailing bytes after record")]
    TrailingBytes(usize),
    #[error("non-canonical encoding: {0}")]
    NonCanonical(String),
    #[error("bad magic header")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("cannot build a Merkle tree over zero leaves")]
    EmptyLeaves,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvidenceError {
    #[error("unknown witness `{0}`")]
    UnknownWitness(String),
    #[error("malformed signature from `{0}`")]
    MalformedSignature(String),
    #[error("insufficient quorum: {distinct} distinct matching witnesses, {required} required")]
    InsufficientQuorum { distinct: usize, required: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("non-contiguous interval: expected {expected}, got {got}")]
    NonContiguous { expected: u64, got: u64 },
    #[error("block digest mismatch at interval {0}")]
    DigestMismatch(u64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("target {target} unreachable: {reason}")]
    Unreachable { target: f64, reason: String },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
