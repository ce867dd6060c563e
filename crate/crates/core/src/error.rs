use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate truncation: conditioning probability {0:e} is below 1e-12")]
    DegenerateTruncation(f64),

    #[error("no sign change in bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("infeasible conditioning: acceptance rate {0:e} is below 1e-6")]
    InfeasibleConditioning(f64),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) | Error::Parse(_) | Error::Protocol(_) => 3,
            Error::Numerical(_)
            | Error::DegenerateTruncation(_)
            | Error::Bracket { .. }
            | Error::InfeasibleConditioning(_) => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
