//! Built-in paths `t ↦ J_t` of almost-complex structures compatible with the
//! standard Darboux form on T⁴.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix4, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::structure::{compatible_metric, omega_matrix, standard_j, AlmostComplexField, OmegaChoice};

type Builder = dyn Fn(f64, &GridSpec) -> Result<AlmostComplexField> + Send + Sync;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathFlags {
    pub compatible: bool,
    pub smooth_in_t: bool,
    pub heak_at_zero: bool,
}

/// A smooth family of ω-compatible almost-complex structures.
#[derive(Clone)]
pub struct JPath {
    pub name: String,
    pub description: String,
    pub t_max: f64,
    pub flags: PathFlags,
    builder: Arc<Builder>,
}

impl fmt::Debug for JPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JPath")
            .field("name", &self.name)
            .field("t_max", &self.t_max)
            .field("flags", &self.flags)
            .finish()
    }
}

impl JPath {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        t_max: f64,
        flags: PathFlags,
        builder: impl Fn(f64, &GridSpec) -> Result<AlmostComplexField> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), description: description.into(), t_max, flags, builder: Arc::new(builder) }
    }

    /// Pointwise path `J_t(x)`.
    pub fn pointwise(
        name: impl Into<String>,
        description: impl Into<String>,
        t_max: f64,
        flags: PathFlags,
        j: impl Fn(f64, [f64; 4]) -> Matrix4<f64> + Send + Sync + 'static,
    ) -> Self {
        let j = Arc::new(j);
        Self::new(name, description, t_max, flags, move |t, grid| {
            let j = j.clone();
            Ok(AlmostComplexField::from_fn(*grid, move |x| j(t, x)))
        })
    }

    pub fn omega_choice(&self) -> OmegaChoice {
        OmegaChoice::StandardDarboux
    }

    /// `J_t` on the lattice, checked for compatibility with ω.
    pub fn at(&self, t: f64, grid: &GridSpec) -> Result<AlmostComplexField> {
        let j = (self.builder)(t, grid)?;
        let w = self.omega_choice().components();
        for (i, m) in j.j.iter().enumerate() {
            compatible_metric(&w, m, i)?;
        }
        Ok(j)
    }
}

/// Symmetric endomorphism anticommuting with `J₀`; `J₀·exp(sA)` stays compatible.
pub fn anticommuting_direction() -> Matrix4<f64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, 1.0, -1.0))
}

/// Second symmetric direction anticommuting with `J₀`, coupling the two planes.
pub fn coupling_direction() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, -1.0, //
        1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    )
}

fn exp_diag(a: &Matrix4<f64>, s: f64) -> Matrix4<f64> {
    Matrix4::from_diagonal(&a.diagonal().map(|v| (s * v).exp()))
}

/// Compatible J for which the two given closed 2-forms are J-anti-invariant.
///
/// Solves `sym(Σ_i J) = 0`, `antisym(Ω J) = 0` for the one-dimensional null
/// space, then fixes scale by `J² = −Id` and sign by positivity of `ΩJ`.
pub fn j_from_anti_invariant_pair(omega: &[f64; 6], s1: &[f64; 6], s2: &[f64; 6]) -> Option<Matrix4<f64>> {
    let mats = [omega_matrix(s1), omega_matrix(s2), omega_matrix(omega)];
    let mut rows: Vec<SVector<f64, 16>> = Vec::with_capacity(26);
    for (which, m) in mats.iter().enumerate() {
        for r in 0..4 {
            let c0 = if which < 2 { r } else { r + 1 };
            for c in c0..4 {
                // (M J)_{rc} ± (M J)_{cr}; J stored column-major as J[(k, l)] -> index k + 4l
                let sign = if which < 2 { 1.0 } else { -1.0 };
                let mut row = SVector::<f64, 16>::zeros();
                for k in 0..4 {
                    row[k + 4 * c] += m[(r, k)];
                    row[k + 4 * r] += sign * m[(c, k)];
                }
                rows.push(row);
            }
        }
    }
    let mut normal = SMatrix::<f64, 16, 16>::zeros();
    for row in &rows {
        normal += row * row.transpose();
    }
    let eig = normal.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    let v = eig.eigenvectors.column(imin);
    let mut j = Matrix4::from_fn(|k, l| v[k + 4 * l]);
    let sq = j * j;
    let c = -sq.trace() / 4.0;
    if c <= 0.0 {
        return None;
    }
    j /= c.sqrt();
    let w = omega_matrix(omega);
    if (w * j).trace() < 0.0 {
        j = -j;
    }
    Some(j)
}

/// Anti-invariant pair of the modulated family at `(t, x)`.
pub fn modulated_pair(t: f64, kappa: f64, x: [f64; 4]) -> ([f64; 6], [f64; 6]) {
    let a = t * kappa * (2.0 * PI * x[2]).cos();
    let b = t * kappa * (2.0 * PI * x[0]).cos();
    ([0.0, 1.0 - a, 0.0, 0.0, -1.0, 0.0], [0.0, 0.0, 1.0 + b, 1.0, 0.0, 0.0])
}

pub fn modulated_j(t: f64, kappa: f64, x: [f64; 4]) -> Matrix4<f64> {
    let (s1, s2) = modulated_pair(t, kappa, x);
    j_from_anti_invariant_pair(&OmegaChoice::StandardDarboux.components(), &s1, &s2)
        .expect("modulated pair stays nondegenerate for |tκ| < 1")
}

pub const DEFAULT_KAPPA: f64 = 1.0;

/// The built-in paths.
///
/// * `torus-constant`: `J_t = J₀`.
/// * `torus-rotation`: constant `J₀·exp(tA)`, a flat metric for every t.
/// * `torus-modulated`: non-integrable, J determined pointwise by keeping the
///   closed forms `(1 − tκ cos 2πx²) dx⁰² − dx¹³` and
///   `(1 + tκ cos 2πx⁰) dx⁰³ + dx¹²` anti-invariant, so `h⁻ = b⁺ − 1` along the path.
/// * `torus-generic`: `J₀·exp(t(cos(2πx⁰) A + sin(2πx²) B))`, with no closed
///   anti-invariant forms imposed; `d𝔾d^c f` picks up anti-invariant parts.
pub fn builtin_j_families() -> Vec<JPath> {
    let all = PathFlags { compatible: true, smooth_in_t: true, heak_at_zero: true };
    vec![
        JPath::pointwise("torus-constant", "constant standard structure J₀", 1.0, all, |_, _| standard_j()),
        JPath::pointwise(
            "torus-rotation",
            "constant compatible structures J₀·exp(tA)",
            1.0,
            all,
            |t, _| standard_j() * exp_diag(&anticommuting_direction(), t),
        ),
        modulated_path(DEFAULT_KAPPA),
        JPath::pointwise(
            "torus-generic",
            "J₀·exp(t(cos(2πx⁰) A + sin(2πx²) B)) without imposed anti-invariant forms",
            0.5,
            all,
            |t, x| {
                let s = anticommuting_direction() * (2.0 * PI * x[0]).cos()
                    + coupling_direction() * (2.0 * PI * x[2]).sin();
                standard_j() * (s * t).exp()
            },
        ),
    ]
}

/// Modulated path with a chosen amplitude κ.
pub fn modulated_path(kappa: f64) -> JPath {
    JPath::pointwise(
        "torus-modulated",
        format!("J_t keeping two modulated closed forms anti-invariant (κ = {kappa})"),
        0.5 / kappa.abs().max(1e-300),
        PathFlags { compatible: true, smooth_in_t: true, heak_at_zero: true },
        move |t, x| modulated_j(t, kappa, x),
    )
}

pub fn find_path(name: &str) -> Result<JPath> {
    builtin_j_families()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown path '{name}'")))
}
