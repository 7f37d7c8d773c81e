use thiserror::Error;

/// Errors produced by the library. Exit-code mapping for the CLI:
/// invalid input -> 1, numerical failure -> 2, anything else -> 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("basis vectors are linearly dependent (|det| = {det:.3e})")]
    InvalidBasis { det: f64 },

    #[error("cell too skewed: the \u{b1}1 minimal-image window is not sufficient")]
    SkewedCell,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate configuration: centers {a} and {b} coincide")]
    CoincidentCenters { a: usize, b: usize },

    #[error("balls {a} and {b} overlap (gap = {gap:.6e})")]
    Overlap { a: usize, b: usize, gap: f64 },

    #[error(
        "flux coefficient has no singularity for d = {d}, p = {p}; gap asymptotics are unusable"
    )]
    NoSingularity { d: usize, p: u32 },

    #[error("logarithmic flux regime is only supported for d = 3, p = 2 (got d = {d}, p = {p})")]
    UnsupportedRegime { d: usize, p: u32 },

    #[error("quadrature stopped at relative error {achieved:.3e} (estimate {estimate:.12e})")]
    Accuracy { estimate: f64, achieved: f64 },

    #[error("value out of floating-point range")]
    Range,

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("infeasible graph class: {0}")]
    InfeasibleClass(String),

    #[error("iteration limit: {0}")]
    IterationLimit(String),

    #[error("degenerate class solution: {0}")]
    DegenerateClass(String),

    #[error("lower bound undefined: all potential drops vanish")]
    UndefinedBound,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code for this error.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidBasis { .. }
            | SkewedCell
            | DimensionMismatch { .. }
            | CoincidentCenters { .. }
            | Overlap { .. }
            | NoSingularity { .. }
            | UnsupportedRegime { .. }
            | InvalidInput(_)
            | Io(_) => 1,
            Accuracy { .. }
            | Range
            | RankDeficient(_)
            | InfeasibleClass(_)
            | IterationLimit(_)
            | DegenerateClass(_)
            | UndefinedBound
            | NumericalFailure(_) => 2,
        }
    }
}
