use thiserror::Error;

use crate::fock::Frame;
use crate::switch::Branch;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("basis frame mismatch: {left} vs {right}")]
    FrameMismatch { left: Frame, right: Frame },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    /// Amplitude leaked into the guard band, or the cutoff schedule ran out.
    #[error("Fock truncation did not converge at cutoff {cutoff}: leak {leak:e} ({detail})")]
    Convergence {
        cutoff: usize,
        leak: f64,
        detail: String,
    },

    #[error("{branch} outcome is degenerate (squared norm {norm_sq:e})")]
    DegenerateOutcome { branch: Branch, norm_sq: f64 },

    #[error("phase-space quadrature failed: normalization deficit {deficit:e} ({detail})")]
    Quadrature { deficit: f64, detail: String },

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
