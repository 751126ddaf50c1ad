use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("observation {0} has zero likelihood under both hypotheses")]
    ImpossibleObservation(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Emission strength outside the `[0, M]` range the sender can produce.
    #[error("strength {alpha} outside [0, {max}]")]
    ProtocolViolation { alpha: f64, max: f64 },

    #[error("protocol misuse: {0}")]
    ProtocolMisuse(String),

    #[error("emitted strength {value} outside [0, {max}]")]
    EmissionRange { value: f64, max: f64 },

    #[error("configuration rejected: {0}")]
    Config(String),

    #[error("adversaries {first} and {second} are {separation} rad apart, need more than {required}")]
    Geometry {
        first: usize,
        second: usize,
        separation: f64,
        required: f64,
    },

    /// The two hypotheses coincide, so no sample size suffices.
    #[error("hypotheses are identical (perfect hiding)")]
    PerfectHiding,

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the CLI: 2 for numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
