use thiserror::Error;

/// Errors surfaced by the simulator.
///
/// `Config`-like variants map to CLI exit code 2, `InsufficientSignal` to
/// exit code 3; everything else is an internal failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("unknown parameter path: {0}")]
    UnknownParameter(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("projector set incomplete: {0}")]
    IncompleteProjectors(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("readout correction is singular: f0 + f1 must exceed 1 (got {f0} + {f1})")]
    SingularCorrection { f0: f64, f1: f64 },

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("photonic mode is in vacuum where a photon is required")]
    VacuumInput,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI should report for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownParameter(_) | Error::Parse(_) => 2,
            Error::InsufficientSignal(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
