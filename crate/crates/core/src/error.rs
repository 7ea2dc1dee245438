use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("degree error: {0}")]
    Degree(String),

    #[error("almost-complex structure not compatible at point {point}: {reason}")]
    Compatibility { point: usize, reason: String },

    #[error("symplectic form not closed: residual {residual:.3e}")]
    Closedness { residual: f64 },

    #[error("harmonic basis extraction failed (degree {degree}): {reason}")]
    Spectrum { degree: usize, reason: String },

    #[error("Krylov solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("insufficient resolution: top-mode energy ratio {ratio:.3e} in {field}")]
    Resolution { field: String, ratio: f64 },

    #[error("form is not J-invariant: anti-invariant ratio {ratio:.3e}")]
    NotInvariant { ratio: f64 },

    #[error("form is not d-exact: {0}")]
    NotExact(String),

    #[error("forms lie in different cohomology classes: harmonic difference {difference:.3e}")]
    ClassMismatch { difference: f64 },

    #[error("vector field is not holomorphic: |L_X J| = {residual:.3e}")]
    NotHolomorphic { residual: f64 },

    #[error("deformed form degenerates (min volume density {min_density:.3e})")]
    DegenerateForm { min_density: f64 },

    #[error("deformation leaves the J-invariant forms: anti-invariant ratio {ratio:.3e}")]
    Invariance { ratio: f64 },

    #[error("Newton iteration diverged at t = {t}: residual history {history:?}")]
    NewtonDivergence { t: f64, history: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
