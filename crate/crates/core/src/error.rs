use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cutoff K={cutoff} is below the potential bandwidth {bandwidth}")]
    CutoffBelowBandwidth { cutoff: usize, bandwidth: usize },

    #[error("cutoff insufficient for energy {energy}: 0.5*hbar^2*K^2 = {kinetic}")]
    CutoffInsufficient { energy: f64, kinetic: f64 },

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("energy window ({lo}, {hi}) exceeds trusted range (trusted up to {trusted})")]
    UntrustedWindow { lo: f64, hi: f64, trusted: f64 },

    #[error("action undefined below max V: E={energy} < {max_v}")]
    BelowMaxPotential { energy: f64, max_v: f64 },

    #[error("cell problem not converged: residual {residual:.3e} after {iterations} sweeps")]
    NotConverged { residual: f64, iterations: usize },

    #[error("flow escaped: |p| = {momentum:.3e} at t = {time}")]
    FlowEscape { momentum: f64, time: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of a numerical iteration, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::FlowEscape { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
