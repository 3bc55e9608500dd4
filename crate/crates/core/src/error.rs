use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("dimension {dim} exceeds the configured maximum {max}; model too large")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("non-finite entry produced by {0}")]
    NonFinite(&'static str),

    /// An eigenvalue sits on (or within the angular tolerance of) the
    /// negative real axis, so the principal logarithm is not defined.
    #[error("{}", branch_cut_message(*.eigenvalue, *.dt))]
    BranchCutViolation {
        eigenvalue: Complex64,
        dt: Option<f64>,
    },

    #[error("matrix is singular (smallest |eigenvalue| = {min_modulus:e}); logarithm undefined")]
    SingularInput { min_modulus: f64 },

    #[error("Schur decomposition failed to converge")]
    NoConvergence,

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("operator `{0}` is not Hermitian within tolerance")]
    NotHermitian(String),

    #[error("invalid convex weights: {0}")]
    InvalidWeights(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("series order {requested} exceeds the implemented maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },

    #[error("not a generator: {0}")]
    NotAGenerator(String),

    #[error("generator has negative rate {min_rate:e}; the purity bound only holds for non-negative rates")]
    NegativeRates { min_rate: f64 },

    #[error("invalid time step {0}: must be finite and strictly positive")]
    InvalidTimeStep(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

fn branch_cut_message(eigenvalue: Complex64, dt: Option<f64>) -> String {
    let base = format!(
        "eigenvalue {:.6e}{:+.6e}i lies on the branch cut of the principal logarithm",
        eigenvalue.re, eigenvalue.im
    );
    match dt {
        Some(dt) => format!("{base} at dt = {dt:e}; reduce the time step"),
        None => base,
    }
}

impl Error {
    pub(crate) fn mismatch(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }
}
