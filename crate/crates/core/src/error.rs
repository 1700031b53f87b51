use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: ||M - M^dag||_F = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary: ||M^dag M - I||_F = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    #[error("eigenlabel tracking is ambiguous at s = {at}: best overlap weight {weight:.3} for label {label}")]
    LabelAmbiguity { at: f64, label: usize, weight: f64 },

    #[error("step doubling did not converge: {slices} vs {} slices differ by {difference:e} (tolerance {tolerance:e})", 2 * slices)]
    StepDoubling {
        slices: usize,
        difference: f64,
        tolerance: f64,
        coarse: Box<crate::linalg::ComplexMatrix>,
        fine: Box<crate::linalg::ComplexMatrix>,
    },

    #[error("pulse {pulse} phase table has {found} entries, model has {expected} eigenlabels")]
    MissingPhaseLabel { pulse: usize, expected: usize, found: usize },

    #[error("geometric condition violated for group {group}, labels ({p}, {q}) at s = {at}: |F - 1| = {deviation:e}")]
    GeometricCondition {
        group: usize,
        p: usize,
        q: usize,
        at: f64,
        deviation: f64,
    },

    #[error("direct and extracted error evolutions disagree by {difference:e} (tolerance {tolerance:e})")]
    CrossValidation {
        difference: f64,
        tolerance: f64,
        direct: Box<crate::linalg::ComplexMatrix>,
        extracted: Box<crate::linalg::ComplexMatrix>,
    },

    #[error("reconstruction residual {residual:e} exceeds tolerance {tolerance:e}")]
    Reconstruction { residual: f64, tolerance: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("no sign change in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("derivative step {step:e} underflows at s = {at}")]
    DerivativeStep { step: f64, at: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
