use thiserror::Error;

/// Errors across the simulation and analysis pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("degenerate frame: tangent parallel to e3 at point {0}")]
    DegenerateFrame(usize),

    /// Adjacent triads related by a rotation too close to π; the
    /// principal square root is ambiguous.
    #[error("frame flip between points {0} and {1} (rotation angle {2:.4} rad)")]
    FrameFlip(usize, usize, f64),

    #[error("numerical instability: {0}")]
    Instability(String),

    /// Implicit calcium step produced a negative concentration.
    #[error("calcium step-size failure (min concentration {0:.3e})")]
    StepSizeFailure(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("incompatible checkpoint version: found {found}, expected {expected}")]
    IncompatibleVersion { found: u32, expected: u32 },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 instability, 4 missing data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameters(_) | Error::Config(_) => 2,
            Error::Instability(_) | Error::FrameFlip(..) | Error::StepSizeFailure(_) => 3,
            Error::MissingData(_)
            | Error::CorruptCheckpoint(_)
            | Error::IncompatibleVersion { .. } => 4,
            _ => 1,
        }
    }
}
