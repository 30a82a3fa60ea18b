//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {details}")]
    DimensionMismatch { op: &'static str, details: String },

    #[error("non-finite entry passed to {op}")]
    NonFinite { op: &'static str },

    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("singular matrix in {op}")]
    Singular { op: &'static str },

    #[error("matrix is not symmetric (skew part {skew:e} exceeds tolerance)")]
    NotSymmetric { skew: f64 },

    #[error("resonant Lyapunov equation: A and -A^T share an eigenvalue")]
    ResonantLyapunov,

    #[error("matrix sign iteration failed: spectrum too close to the imaginary axis ({details})")]
    ImaginaryAxisSpectrum { details: String },

    #[error("pencil regularity required for {op}; use the unimodular route instead")]
    RegularityRequired { op: &'static str },

    #[error("feedback regularization failed after {attempts} draws; use the unimodular route")]
    FeedbackRegularizationFailed { attempts: usize },

    #[error(
        "unsupported pencil structure: overdetermined blocks (row sizes {row_sizes:?}) on a \
         singular system and the reduced initial state depends on the input (residual {residual:e})"
    )]
    UnsupportedStructure {
        row_sizes: Vec<usize>,
        residual: f64,
    },

    #[error("structural inconsistency: {details}")]
    StructuralInconsistency { details: String },

    #[error("CARE solver failed: {details}")]
    CareFailure { details: String },

    #[error("assumption check failed: {details}")]
    AssumptionViolated { details: String },

    #[error("optimal control problem is infeasible at the current state ({details})")]
    OcpInfeasible { details: String },

    #[error("closed loop lost feasibility at step {step} (t = {time}): {details}")]
    FeasibilityLost {
        step: usize,
        time: f64,
        details: String,
    },

    #[error("invalid configuration: {details}")]
    InvalidConfig { details: String },

    #[error("{stage} stage failed: {source}")]
    Pipeline {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Pipeline {
            stage,
            source: Box::new(self),
        }
    }
}
