use thiserror::Error;

/// Failure modes shared by every engine in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QvarError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("qubit budget exceeded: need {need}, cap {cap}")]
    QubitBudget { need: usize, cap: usize },

    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    SingularPivot { row: usize, pivot: f64 },

    #[error("fixed-point overflow: value {value} exceeds range {range_max}")]
    FixedPointOverflow { value: f64, range_max: f64 },

    #[error("operator is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("block-encoding certification failed: error {0:e}")]
    Certification(f64),

    #[error("polynomial degree cap {cap} exceeded (best error {best_err:e})")]
    DegreeCap { cap: usize, best_err: f64 },

    #[error("phase-factor solver did not converge after {iters} iterations (residual {residual:e})")]
    PhaseSolver { iters: usize, residual: f64 },

    #[error("success probability {prob:e} below floor {floor:e}")]
    LowSuccess { prob: f64, floor: f64 },

    #[error("price codes missing from grid for paths {0:?}")]
    CodeMismatch(Vec<usize>),

    #[error("degenerate price codes: grid nodes {0} and {1} share a code")]
    DuplicateCodes(usize, usize),

    #[error("uncompute left residual amplitude {0:e}")]
    Uncompute(f64),

    #[error("empty tail set")]
    EmptyTail,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{0}")]
    Numerical(String),
}

impl QvarError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            QvarError::InvalidParam(_) | QvarError::Dimension(_) => 2,
            QvarError::QubitBudget { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, QvarError>;
