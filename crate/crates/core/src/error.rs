use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("automorphism has determinant {0}; only det = 1 is supported (measure-preserving, orientation-preserving)")]
    NotUnimodular(i64),

    #[error("automorphism has trace {0}; |trace| must exceed 2 for hyperbolicity")]
    NotHyperbolic(i64),

    #[error("integer overflow pushing frequency ({k1}, {k2}) forward {n} steps")]
    FrequencyOverflow { k1: i64, k2: i64, n: i64 },

    #[error("|n| = {0} exceeds the pushforward cap of {1}")]
    PushforwardCap(i64, i64),

    #[error("invalid sampling function: {0}")]
    InvalidSampling(String),

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("|alpha| = {0} is not inside the unit disk")]
    CoefficientOutsideDisk(f64),

    #[error("spectral function has imaginary residue {0:e}; correlations are not Hermitian")]
    NonRealSpectrum(f64),

    #[error("truncation {given} too small: correlation at n = {needed} is nonzero")]
    TruncationTooSmall { given: usize, needed: usize },

    #[error("boundary datum has modulus {0}, expected 1")]
    NotUnimodularBoundary(f64),

    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(usize, usize),

    #[error("unitarity residual {0:e} exceeds construction tolerance")]
    NotUnitary(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("resolvent blow-up: z is within {distance:e} of the spectrum")]
    ResolventBlowup { distance: f64 },

    #[error("query rejected: {0}")]
    InvalidQuery(String),

    #[error("eigensolver did not converge: {0}")]
    EigenFailure(String),

    #[error("fit needs at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::NotUnimodular(_)
                | Error::NotHyperbolic(_)
                | Error::PushforwardCap(..)
                | Error::InvalidSampling(_)
                | Error::InvalidCoupling(_)
                | Error::CoefficientOutsideDisk(_)
                | Error::TruncationTooSmall { .. }
                | Error::NotUnimodularBoundary(_)
                | Error::InvalidInterval(..)
                | Error::InvalidQuery(_)
                | Error::Config(_)
        )
    }
}
