use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("no sideband transition for zero control photons")]
    NoTransition,

    #[error("fourth-order expansion invalid: |phi_q * xi| = {0:.3} >= 0.5")]
    ExpansionValidity(f64),

    #[error("unphysical coherence: {0}")]
    Physicality(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("truncation too small: {0}")]
    Truncation(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("underdetermined reconstruction: {0}")]
    Underdetermined(String),

    #[error("leakage out of code space: {0}")]
    Leakage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
