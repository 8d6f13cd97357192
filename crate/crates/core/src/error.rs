use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the numerical pipeline.
///
/// Every variant maps to a broken precondition of one module; [`Error::kind`]
/// and [`Error::module`] give stable machine-readable names for reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension {0} is not supported (1 <= d <= 3)")]
    DimensionUnsupported(usize),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("test-function bank under-resolved: Gram deviates from identity by {deviation:.3e}")]
    UnderResolved { deviation: f64 },

    #[error("Bessel potential requires a uniform (trapezoid) grid")]
    NonUniformGrid,

    #[error("spectral leakage: {fraction:.3e} of the input energy sits in the top frequency decile")]
    SpectralLeakage { fraction: f64 },

    #[error("operator stage `{0}` has no attached basis")]
    BasisMissing(&'static str),

    #[error(
        "covariance growth bound violated at nodes ({i}, {j}): |C| = {observed:.6e} exceeds bound {bound:.6e}; the measure order M is too small"
    )]
    GrowthBoundViolated { i: usize, j: usize, observed: f64, bound: f64 },

    #[error("kernel is not positive semi-definite at this resolution: eigenvalue {min:.6e} against largest {max:.6e}")]
    NotPositiveSemiDefinite { min: f64, max: f64 },

    #[error("requested {requested} modes but only {available} are available")]
    TooManyModes { requested: usize, available: usize },

    #[error(
        "whitening needs infinitely many non-null variances; found only {rank} numerically positive modes, {required} required"
    )]
    FiniteRank { rank: usize, required: usize },

    #[error("basis is not L2-orthonormal: max Gram deviation {deviation:.3e}")]
    BasisNotOrthonormal { deviation: f64 },

    #[error("need at least {required} realizations, got {found}")]
    InsufficientSamples { required: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable variant name used in JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionUnsupported(_) => "DimensionUnsupported",
            Error::DegenerateGrid(_) => "DegenerateGrid",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::UnderResolved { .. } => "UnderResolved",
            Error::NonUniformGrid => "NonUniformGrid",
            Error::SpectralLeakage { .. } => "SpectralLeakage",
            Error::BasisMissing(_) => "BasisMissing",
            Error::GrowthBoundViolated { .. } => "GrowthBoundViolated",
            Error::NotPositiveSemiDefinite { .. } => "NotPositiveSemiDefinite",
            Error::TooManyModes { .. } => "TooManyModes",
            Error::FiniteRank { .. } => "FiniteRank",
            Error::BasisNotOrthonormal { .. } => "BasisNotOrthonormal",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Io(_) => "Io",
        }
    }

    /// Module whose precondition was violated.
    pub fn module(&self) -> &'static str {
        match self {
            Error::DimensionUnsupported(_) | Error::DegenerateGrid(_) | Error::ShapeMismatch { .. } => {
                "grid_measure"
            }
            Error::UnderResolved { .. } => "hermite_bank",
            Error::NonUniformGrid | Error::SpectralLeakage { .. } | Error::BasisMissing(_) => {
                "operator_kit"
            }
            Error::GrowthBoundViolated { .. }
            | Error::NotPositiveSemiDefinite { .. }
            | Error::TooManyModes { .. } => "kl_engine",
            Error::FiniteRank { .. } | Error::BasisNotOrthonormal { .. } => "factorization",
            Error::InsufficientSamples { .. } => "mc_verify",
            Error::InvalidParameter(_) | Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
