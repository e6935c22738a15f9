use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("party labels overlap: {0:?}")]
    LabelCollision(Vec<usize>),
    #[error("party {0} is not part of this register")]
    UnknownParty(usize),
    #[error("subsystem must contain at least one party")]
    EmptySubsystem,
    #[error("bipartition blocks must be non-empty proper subsets of the subsystem")]
    DegenerateBipartition,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("register of {qubits} qubits exceeds the supported maximum of {max}")]
    RegisterTooLarge { qubits: usize, max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not a valid density matrix: {0}")]
    InvalidState(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no outcome counts to reconstruct from")]
    EmptyCounts,
    #[error("log-likelihood became non-finite")]
    NonFiniteLikelihood,
    #[error("no null distribution available for key {0}")]
    MissingNull(String),
    #[error("unsupported null key {0}")]
    UnsupportedNullKey(String),
    #[error("null distribution has no samples")]
    EmptyNull,
    #[error("partitions are over different ground sets ({0} vs {1})")]
    GroundSetMismatch(usize, usize),
    #[error("{what} is limited to n <= {max}, got {n}")]
    TooLarge { what: &'static str, n: usize, max: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 2 configuration, 3 missing input, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::MissingNull(_) | Self::MissingInput(_) => 3,
            Self::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 3,
            Self::NonFiniteLikelihood | Self::Numerical(_) | Self::InvalidState(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
