use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the numerical routines. Every variant is recoverable by
/// the caller; none of them aborts the process.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {z} lies within {distance:.3e} of a lattice pole")]
    PoleProximity { z: Complex64, distance: f64 },
    #[error("theta/Fourier series does not converge for tau = {tau}")]
    SeriesDivergence { tau: Complex64 },
    #[error("multiplicity vector {n:?} is not normalized (n0 must be the largest entry)")]
    NotNormalized { n: [u32; 4] },
    #[error("multiplicity vector {n:?} has even sum; the dual vector is undefined")]
    ParityError { n: [u32; 4] },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("integration exceeded {max_steps} steps")]
    StepLimitExceeded { max_steps: usize },
    #[error("step size underflow at x = {x}")]
    StepSizeUnderflow { x: f64 },
    #[error("E = {e} is not a periodic or antiperiodic eigenvalue (|Delta -/+ 2| = {residual:.3e})")]
    NotAnEigenvalue { e: f64, residual: f64 },
    #[error("tolerance failure: {0}")]
    TolFailure(String),
    #[error("Fourier grid of size {grid} does not resolve the potential (top-mode ratio {ratio:.3e})")]
    ResolutionError { grid: usize, ratio: f64 },
    #[error("least-squares system for the recursion constants is rank deficient (singular value ratio {ratio:.3e})")]
    RankDeficiency { ratio: f64 },
    #[error("spectral polynomial varies along the line (diagnostic {diag:.3e})")]
    ConstancyFailure { diag: f64 },
    #[error("root {root} is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { root: Complex64, condition: f64 },
    #[error("spectrum has no band structure: {0}")]
    BandStructureMissing(String),
}

impl Error {
    /// Stable identifier of the error kind, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::PoleProximity { .. } => "PoleProximity",
            Error::SeriesDivergence { .. } => "SeriesDivergence",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::ParityError { .. } => "ParityError",
            Error::InvalidInput(_) => "InvalidInput",
            Error::StepLimitExceeded { .. } => "StepLimitExceeded",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::NotAnEigenvalue { .. } => "NotAnEigenvalue",
            Error::TolFailure(_) => "TolFailure",
            Error::ResolutionError { .. } => "ResolutionError",
            Error::RankDeficiency { .. } => "RankDeficiency",
            Error::ConstancyFailure { .. } => "ConstancyFailure",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::BandStructureMissing(_) => "BandStructureMissing",
        }
    }

    /// Errors caused by malformed input rather than numerical trouble.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::NotNormalized { .. } | Error::ParityError { .. }
        )
    }
}
