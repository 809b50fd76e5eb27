use thiserror::Error;

use crate::phase::Chart;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix dimension must be at least 2, got {0}")]
    TooSmall(usize),

    #[error("torus element is not regular: minimal eigenvalue gap {gap:.3e} <= {threshold:.3e}")]
    NotRegular { gap: f64, threshold: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {min_eig:.3e} <= {floor:.3e}")]
    NotPositiveDefinite { min_eig: f64, floor: f64 },

    #[error("matrix is not unitary: defect {defect:.3e}")]
    NotUnitary { defect: f64 },

    #[error("matrix violates {what}: {detail}")]
    Structure { what: &'static str, detail: String },

    #[error("strict membership in {subspace} failed: discarded part has norm {discarded:.3e}")]
    Membership {
        subspace: &'static str,
        discarded: f64,
    },

    #[error("non-finite value of observable `{name}` near the evaluation point")]
    NonFinite { name: String },

    #[error("observables must share one chart ({expected:?} vs {found:?})")]
    ChartMismatch { expected: Chart, found: Chart },

    #[error("eigenvalues of g collide: minimal gap {gap:.3e} <= {threshold:.3e}")]
    EigenvalueCollision { gap: f64, threshold: f64 },

    #[error("trajectory left the regular set at sample {index} (t = {t}): {reason}")]
    RegularityLost {
        index: usize,
        t: f64,
        reason: String,
    },

    #[error("sampler exhausted its redraw budget for seed {seed}")]
    RedrawBudget { seed: u64 },

    #[error("unknown check id `{0}`")]
    UnknownCheck(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
