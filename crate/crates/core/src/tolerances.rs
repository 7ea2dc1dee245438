//! Default tolerances. Every value here can be overridden per run from the CLI config.

/// Pointwise algebraic identities (J² = −Id, compatibility, symmetry of g).
pub const ALGEBRAIC: f64 = 1e-10;

/// Zero-mean flag: |mean| ≤ MEAN · sup-norm.
pub const MEAN: f64 = 1e-12;

/// Closedness of a symplectic form, relative to its sup-norm times the largest wavenumber.
pub const CLOSEDNESS: f64 = 1e-9;

/// Relative amplitude allowed in the top half of the spectrum before curvature refuses to run.
pub const ALIASING: f64 = 1e-8;

/// Harmonic basis acceptance: |Δh| ≤ HARMONIC · λ₁ · |h|.
pub const HARMONIC: f64 = 1e-8;

/// J-invariance precondition on exact forms.
pub const INVARIANCE: f64 = 1e-6;

/// Holomorphy precondition for vector fields.
pub const HOLOMORPHY: f64 = 1e-6;

/// HEAK detection thresholds.
pub const HEAK: f64 = 1e-6;

/// Green solves return zero when the non-harmonic part is below ROUNDOFF times the input.
pub const ROUNDOFF: f64 = 1e-13;
