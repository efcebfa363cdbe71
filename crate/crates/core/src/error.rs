use thiserror::Error;

/// Errors raised by the link simulator and its DSP blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {0}")]
    Length(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// An integration step or estimator would be unstable or undefined.
    #[error("numeric guard tripped: {0}")]
    Numeric(String),

    #[error("filter bank does not cover the input range (max {max:.6}, top level {top:.6}); need n >= {required}")]
    BankCoverage { max: f64, top: f64, required: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numeric guards, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Length(_) | Error::Domain(_) => 2,
            Error::Numeric(_) | Error::BankCoverage { .. } => 3,
            Error::Io(_) | Error::Serialize(_) => 1,
        }
    }
}
