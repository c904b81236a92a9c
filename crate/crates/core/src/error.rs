use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),

    #[error("admissibility degree {degree} outside [1, {max}]")]
    DegreeOutOfRange { degree: u32, max: u32 },

    #[error("admissibility check over {0} acks exceeds the enumeration cap of 16")]
    EnumerationCap(usize),

    #[error("protocol invariant violated: {0}")]
    ProtocolInvariant(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("malformed history: {0}")]
    MalformedHistory(String),

    #[error("oracle limit exceeded: {ops} operations (max {max})")]
    OracleLimit { ops: usize, max: usize },

    #[error("diagnostic unavailable: {0}")]
    Diagnostic(String),

    #[error("chain precondition violated: {0}")]
    ChainPrecondition(String),

    #[error("protocol `{0}` is not a fast-write candidate (writes take more than one round-trip)")]
    NotFastWrite(String),

    #[error("unknown protocol `{0}` (expected one of: w2r1, w2r2-abd, w1r2-naive)")]
    UnknownProtocol(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid experiment config: {0}")]
    InvalidExperiment(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
