use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice basis is singular or malformed: {0}")]
    InvalidLattice(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corrupted Fourier coefficients: imaginary residue {residue:.3e} at evaluation")]
    CorruptedCoefficients { residue: f64 },

    #[error("coefficients violate Hermitian symmetry by {violation:.3e}")]
    NotHermitian { violation: f64 },

    #[error("aliasing: radius {radius} needs at least {needed} samples per axis, got {got}")]
    Aliasing { radius: usize, needed: usize, got: usize },

    #[error("basis of size {size} exceeds the dense cap {cap}")]
    BasisTooLarge { size: usize, cap: usize },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst:.3e})")]
    NotConverged { iterations: usize, worst: f64, residuals: Vec<f64> },

    #[error("fiber {index} failed: {source}")]
    Fiber {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{} of {total} fibers failed; first: {}", failures.len(), failures.first().map(|f| f.1.as_str()).unwrap_or(""))]
    Sweep { total: usize, failures: Vec<(usize, String)> },

    #[error("empty comparison window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("quadrature too coarse: {got} points per unit, need more than {needed:.2}")]
    QuadratureTooCoarse { got: usize, needed: f64 },

    #[error("real-space problem with {unknowns} unknowns exceeds the memory cap {cap}")]
    MemoryCap { unknowns: usize, cap: usize },

    #[error("an empty solution set has infinite distance")]
    EmptySet,
}

pub type Result<T> = std::result::Result<T, Error>;
