//! Numerical and exact-algebraic almost-Kähler geometry on compact 4-manifolds.
//!
//! The lattice side works on the flat torus T⁴ with spectral derivatives;
//! the `kt` module handles the Kodaira–Thurston nilmanifold exactly in an
//! invariant frame.

pub mod calculus;
pub mod curvature;
pub mod ddc;
pub mod deform;
pub mod error;
pub mod families;
pub mod fft;
pub mod forms;
pub mod grid;
pub mod identities;
pub mod io;
pub mod kt;
pub mod krylov;
pub mod random;
pub mod structure;
pub mod tolerances;

pub use error::{Error, Result};
