use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("mode count must be at least 1")]
    InvalidModeCount,

    #[error("mode index {index} out of range for {modes} mode(s)")]
    ModeOutOfRange { index: usize, modes: usize },

    #[error("transmissivity {0} outside (0, 1]")]
    InvalidTransmissivity(f64),

    #[error("matrix is not symplectic (max |SJSᵀ - J| = {residual:.3e})")]
    NotSymplectic { residual: f64 },

    #[error("matrix is not unitary (max |UU† - I| = {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("matrix lacks passive block structure (asymmetry {asymmetry:.3e})")]
    NotPassive { asymmetry: f64 },

    #[error("invalid Gaussian state: {0}")]
    InvalidState(String),

    #[error("homodyne detection needs at least 2 shots per setting, got {0}")]
    InsufficientShots(u64),

    #[error("probe amplitude must be positive, got {0}")]
    InvalidAmplitude(f64),

    #[error("loss recovery failed: det(S̃) = {det:.3e} is not positive")]
    LossRecoveryFailure { det: f64 },

    #[error(
        "reconstructed unitary residual {residual:.3e} exceeds threshold {threshold:.3e}; device is not passive"
    )]
    NonPassiveDevice { residual: f64, threshold: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed matrix document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical pipeline itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::LossRecoveryFailure { .. } | Error::NonPassiveDevice { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
