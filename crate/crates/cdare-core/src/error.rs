use thiserror::Error;

/// Errors produced by the matrix kernel, problem construction and solvers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {details}")]
    Dimension {
        context: &'static str,
        details: String,
    },

    #[error("matrix contains non-finite entries ({context})")]
    NonFinite { context: &'static str },

    #[error(
        "matrix is not Hermitian within tolerance: asymmetry {asymmetry:.3e} exceeds {bound:.3e}"
    )]
    NotHermitian { asymmetry: f64, bound: f64 },

    #[error("singular matrix in {context}: reciprocal condition estimate {rcond:.3e}")]
    Singular { context: String, rcond: f64 },

    #[error("stability precondition violated in {context}: spectral radius {rho:.6} >= 1")]
    Unstable { context: String, rho: f64 },

    #[error("outside operator domain: {what}")]
    Domain { what: String },

    #[error("assumption violated: {what}")]
    AssumptionViolation { what: String },

    #[error("flow operator breakdown at outer step {outer}, inner step {inner}: I + G*H is singular")]
    FlowBreakdown { outer: usize, inner: usize },

    #[error(
        "no real solution: constant term {h:.6} lies in the gap ({h_min:.6}, {h_max:.6}) where the discriminant is negative"
    )]
    NoRealSolution { h: f64, h_min: f64, h_max: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
