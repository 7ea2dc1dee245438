//! Almost-complex structures and compatible triples (ω, J, g).

use std::sync::Arc;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::exterior_d;
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::forms::{basis, position, wedge_sign, ExtMat, FormField, ScalarField};
use crate::grid::{pairwise_sum, pairwise_sum_by, GridSpec};
use crate::tolerances;

/// Field of endomorphisms of the tangent bundle, one 4×4 matrix per point.
///
/// Column `b` of `j[i]` is `J e_b`, so `J` acts on coordinate vectors by
/// ordinary matrix multiplication.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostComplexField {
    pub grid: GridSpec,
    pub j: Vec<Matrix4<f64>>,
}

impl AlmostComplexField {
    pub fn new(grid: GridSpec, j: Vec<Matrix4<f64>>) -> Result<Self> {
        if j.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} matrices for {} points", j.len(), grid.len())));
        }
        Ok(Self { grid, j })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 4]) -> Matrix4<f64> + Sync) -> Self {
        let j = (0..grid.len()).into_par_iter().map(|i| f(grid.coords(i))).collect();
        Self { grid, j }
    }

    pub fn constant(grid: GridSpec, m: Matrix4<f64>) -> Self {
        Self { grid, j: vec![m; grid.len()] }
    }

    /// Largest entry of `J² + Id` over the lattice.
    pub fn square_defect(&self) -> f64 {
        self.j
            .iter()
            .map(|m| (m * m + Matrix4::identity()).amax())
            .fold(0.0, f64::max)
    }
}

/// `J₀ e₀ = e₁, J₀ e₂ = e₃`, compatible with the standard Darboux form.
pub fn standard_j() -> Matrix4<f64> {
    Matrix4::new(
        0.0, -1.0, 0.0, 0.0, //
        1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, -1.0, //
        0.0, 0.0, 1.0, 0.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaChoice {
    /// `dx⁰∧dx¹ + dx²∧dx³`.
    StandardDarboux,
}

impl OmegaChoice {
    pub fn components(self) -> [f64; 6] {
        match self {
            OmegaChoice::StandardDarboux => [1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        }
    }
}

/// Antisymmetric matrix `Ω_{ab} = ω(e_a, e_b)` from 2-form components.
pub fn omega_matrix(w: &[f64; 6]) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for (c, &mask) in basis(2).iter().enumerate() {
        let a = mask.trailing_zeros() as usize;
        let b = 7 - (mask as u8).leading_zeros() as usize;
        m[(a, b)] = w[c];
        m[(b, a)] = -w[c];
    }
    m
}

/// Pfaffian of ω, i.e. the density of `ω²/2` against `dx⁰¹²³`.
#[inline]
pub fn pfaffian(w: &[f64; 6]) -> f64 {
    w[0] * w[5] - w[1] * w[4] + w[2] * w[3]
}

/// Check a single point and return the symmetrized metric `g = ΩJ`.
pub fn compatible_metric(omega: &[f64; 6], j: &Matrix4<f64>, point: usize) -> Result<Matrix4<f64>> {
    let fail = |reason: String| Error::Compatibility { point, reason };
    let w = omega_matrix(omega);
    let scale = 1.0 + j.amax() * j.amax();
    let sq = (j * j + Matrix4::identity()).amax();
    if sq > tolerances::ALGEBRAIC * scale {
        return Err(fail(format!("|J² + Id| = {sq:.3e}")));
    }
    let inv = (j.transpose() * w * j - w).amax();
    if inv > tolerances::ALGEBRAIC * scale * w.amax().max(f64::MIN_POSITIVE) {
        return Err(fail(format!("|ω(J·,J·) − ω| = {inv:.3e}")));
    }
    let g = w * j;
    let asym = (g - g.transpose()).amax();
    if asym > tolerances::ALGEBRAIC * scale * g.amax() {
        return Err(fail(format!("ω(·,J·) not symmetric ({asym:.3e})")));
    }
    let g = (g + g.transpose()) * 0.5;
    if g.cholesky().is_none() {
        return Err(fail("ω(·,J·) not positive definite".into()));
    }
    Ok(g)
}

/// Almost-Kähler structure on the lattice with derived metric data.
#[derive(Debug, Clone)]
pub struct CompatibleTriple {
    omega: FormField,
    j: AlmostComplexField,
    g: Vec<Matrix4<f64>>,
    ginv: Vec<Matrix4<f64>>,
    vol: Vec<f64>,
    closedness: f64,
    spectral: Arc<Spectral>,
}

/// The three pieces of a 2-form under J: `ψ = s·ω + anti_invariant + invariant_traceless`.
#[derive(Debug, Clone)]
pub struct TypeParts {
    pub scalar_part: ScalarField,
    pub anti_invariant: FormField,
    pub invariant_traceless: FormField,
}

impl CompatibleTriple {
    pub fn new(omega: FormField, j: AlmostComplexField) -> Result<Self> {
        let spectral = Arc::new(Spectral::new(omega.grid));
        Self::with_spectral(omega, j, spectral)
    }

    /// Build reusing transform plans for the same grid.
    pub fn with_spectral(omega: FormField, j: AlmostComplexField, spectral: Arc<Spectral>) -> Result<Self> {
        omega.grid.check_same(&j.grid)?;
        omega.grid.check_same(spectral.grid())?;
        if omega.degree != 2 {
            return Err(Error::Degree(format!("ω must be a 2-form, got degree {}", omega.degree)));
        }
        let n = omega.grid.len();
        let g: Vec<Matrix4<f64>> = (0..n)
            .into_par_iter()
            .map(|i| compatible_metric(&omega.at(i), &j.j[i], i))
            .collect::<Result<_>>()?;
        let vol: Vec<f64> = (0..n).map(|i| pfaffian(&omega.at(i))).collect();
        if let Some(i) = vol.iter().position(|&v| v <= 0.0) {
            return Err(Error::Compatibility { point: i, reason: "ω²/2 is not positively oriented".into() });
        }
        let ginv = g.par_iter().map(|m| m.try_inverse().expect("positive definite")).collect();

        let d_omega = exterior_d(&spectral, &omega)?;
        let closedness = d_omega.sup_norm() / (omega.sup_norm() * spectral.max_wavenumber());
        if closedness > tolerances::CLOSEDNESS {
            return Err(Error::Closedness { residual: closedness });
        }
        Ok(Self { omega, j, g, ginv, vol, closedness, spectral })
    }

    /// Same ω, different J (used along a path J_t).
    pub fn with_j(&self, j: AlmostComplexField) -> Result<Self> {
        Self::with_spectral(self.omega.clone(), j, self.spectral.clone())
    }

    /// Same J, different ω.
    pub fn with_omega(&self, omega: FormField) -> Result<Self> {
        Self::with_spectral(omega, self.j.clone(), self.spectral.clone())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.omega.grid
    }

    pub fn omega(&self) -> &FormField {
        &self.omega
    }

    pub fn j_field(&self) -> &AlmostComplexField {
        &self.j
    }

    pub fn spectral(&self) -> &Arc<Spectral> {
        &self.spectral
    }

    #[inline]
    pub fn j(&self, i: usize) -> &Matrix4<f64> {
        &self.j.j[i]
    }

    #[inline]
    pub fn g(&self, i: usize) -> &Matrix4<f64> {
        &self.g[i]
    }

    #[inline]
    pub fn ginv(&self, i: usize) -> &Matrix4<f64> {
        &self.ginv[i]
    }

    /// Density of `ω²/2` against `dx⁰¹²³`.
    pub fn volume_density(&self) -> &[f64] {
        &self.vol
    }

    /// `|dω|_∞ / (|ω|_∞ · k_max)` measured at construction.
    pub fn closedness_residual(&self) -> f64 {
        self.closedness
    }

    pub fn total_volume(&self) -> f64 {
        pairwise_sum(&self.vol) * self.grid().cell_volume()
    }

    /// Mean against the volume form.
    pub fn mean(&self, f: &[f64]) -> f64 {
        crate::forms::weighted_mean(f, &self.vol)
    }

    pub fn zero_mean(&self, f: &ScalarField) -> ScalarField {
        f.shift(-self.mean(&f.values))
    }

    /// Pointwise inner product matrix on p-forms, `Λ^p(g⁻¹)`.
    #[inline]
    pub fn form_metric(&self, i: usize, p: usize) -> ExtMat {
        ExtMat::exterior_power(&self.ginv[i], p)
    }

    /// Matrix of `ψ ↦ Jψ` on degree-p components at point `i`.
    #[inline]
    pub fn j_matrix(&self, i: usize, p: usize) -> ExtMat {
        let m = ExtMat::pullback(&self.j.j[i], p);
        if p % 2 == 1 {
            m.scale(-1.0)
        } else {
            m
        }
    }

    /// `(Jψ)(X₁,…,X_p) = (−1)^p ψ(JX₁,…,JX_p)`.
    pub fn j_act(&self, psi: &FormField) -> Result<FormField> {
        self.grid().check_same(&psi.grid)?;
        let p = psi.degree;
        Ok(psi.map_pointwise(p, |i, v| self.j_matrix(i, p).apply(v)))
    }

    /// Inverse of [`Self::j_act`]: `J⁻¹ = (−1)^p J` on p-forms.
    pub fn j_inv_act(&self, psi: &FormField) -> Result<FormField> {
        let out = self.j_act(psi)?;
        Ok(if psi.degree % 2 == 1 { out.scaled(-1.0) } else { out })
    }

    pub fn pointwise_inner(&self, a: &FormField, b: &FormField) -> Result<ScalarField> {
        a.check_compatible(b)?;
        self.grid().check_same(&a.grid)?;
        let p = a.degree;
        let values = (0..a.grid.len())
            .into_par_iter()
            .map(|i| {
                let gb = self.form_metric(i, p).apply(&b.at(i));
                let av = a.at(i);
                (0..crate::forms::n_components(p)).map(|c| av[c] * gb[c]).sum()
            })
            .collect();
        Ok(ScalarField { grid: a.grid, values })
    }

    /// `∫ g(a, b) ω²/2`.
    pub fn l2_inner(&self, a: &FormField, b: &FormField) -> Result<f64> {
        let ip = self.pointwise_inner(a, b)?;
        let vol = &self.vol;
        Ok(pairwise_sum_by(ip.values.len(), &|i| ip.values[i] * vol[i]) * self.grid().cell_volume())
    }

    pub fn l2_norm(&self, a: &FormField) -> f64 {
        self.l2_inner(a, a).expect("same grid").max(0.0).sqrt()
    }

    /// `∫ f h ω²/2` for functions.
    pub fn l2_inner_scalar(&self, f: &[f64], h: &[f64]) -> f64 {
        let vol = &self.vol;
        pairwise_sum_by(f.len(), &|i| f[i] * h[i] * vol[i]) * self.grid().cell_volume()
    }

    /// Riemannian Hodge star, `ψ₁ ∧ ∗ψ₂ = g(ψ₁, ψ₂) ω²/2`.
    pub fn hodge_star(&self, psi: &FormField) -> Result<FormField> {
        self.grid().check_same(&psi.grid)?;
        let p = psi.degree;
        let src = basis(p);
        let signs: Vec<(usize, f64)> = src
            .iter()
            .map(|&m| {
                let c = 0b1111 ^ m;
                (position(c), wedge_sign(m, c))
            })
            .collect();
        Ok(psi.map_pointwise(4 - p, |i, v| {
            let gv = self.form_metric(i, p).apply(v);
            let mut out = [0.0; 6];
            for (k, &(dst, s)) in signs.iter().enumerate() {
                out[dst] = self.vol[i] * s * gv[k];
            }
            out
        }))
    }

    /// `L_ω ψ = ω ∧ ψ`.
    pub fn lefschetz(&self, psi: &FormField) -> Result<FormField> {
        self.grid().check_same(&psi.grid)?;
        let p = psi.degree;
        if p > 2 {
            return Err(Error::Degree(format!("L_ω needs degree ≤ 2, got {p}")));
        }
        Ok(psi.map_pointwise(p + 2, |i, v| ExtMat::lefschetz(&self.omega.at(i), p).apply(v)))
    }

    /// `Λ_ω`, the pointwise adjoint of `L_ω`; normalized so `Λ_ω ω = 2`.
    pub fn contraction(&self, psi: &FormField) -> Result<FormField> {
        self.grid().check_same(&psi.grid)?;
        let p = psi.degree;
        if p < 2 {
            return Err(Error::Degree(format!("Λ_ω needs degree ≥ 2, got {p}")));
        }
        Ok(psi.map_pointwise(p - 2, |i, v| {
            let gp = self.form_metric(i, p).apply(v);
            let lt = ExtMat::lefschetz(&self.omega.at(i), p - 2).transpose().apply(&gp);
            ExtMat::exterior_power(&self.g[i], p - 2).apply(&lt)
        }))
    }

    /// Split a 2-form by J-type.
    pub fn type_decompose(&self, psi: &FormField) -> Result<TypeParts> {
        if psi.degree != 2 {
            return Err(Error::Degree(format!("type decomposition needs a 2-form, got degree {}", psi.degree)));
        }
        let jpsi = self.j_act(psi)?;
        let scalar = self.pointwise_inner(psi, &self.omega)?.scaled(0.5);
        let anti = psi.lin(0.5, &jpsi, -0.5);
        let mut inv = psi.lin(0.5, &jpsi, 0.5);
        inv.axpy(-1.0, &self.omega.mul_scalar_field(&scalar.values));
        Ok(TypeParts { scalar_part: scalar, anti_invariant: anti, invariant_traceless: inv })
    }

    /// J-anti-invariant part `(ψ − Jψ)/2` of a 2-form.
    pub fn anti_invariant_part(&self, psi: &FormField) -> Result<FormField> {
        let jpsi = self.j_act(psi)?;
        Ok(psi.lin(0.5, &jpsi, -0.5))
    }
}

/// Build a triple on the torus from a standard ω and a pointwise J.
pub fn build_torus_grid(
    spec: GridSpec,
    omega_choice: OmegaChoice,
    j_builder: impl Fn([f64; 4]) -> Matrix4<f64> + Sync,
) -> Result<CompatibleTriple> {
    let omega = FormField::constant(spec, 2, &omega_choice.components());
    let j = AlmostComplexField::from_fn(spec, j_builder);
    CompatibleTriple::new(omega, j)
}

/// Flat torus with the standard constant structure.
pub fn flat_triple(spec: GridSpec) -> Result<CompatibleTriple> {
    build_torus_grid(spec, OmegaChoice::StandardDarboux, |_| standard_j())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::cubic(4).unwrap()
    }

    #[test]
    fn flat_triple_has_identity_metric() {
        let t = flat_triple(grid()).unwrap();
        assert!((t.g(0) - Matrix4::identity()).amax() < 1e-15);
        assert_eq!(t.volume_density()[3], 1.0);
        let w = t.omega().clone();
        let ip = t.pointwise_inner(&w, &w).unwrap();
        assert!(ip.values.iter().all(|&v| (v - 2.0).abs() < 1e-14));
        assert!((t.l2_inner(&w, &w).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn bad_j_is_rejected() {
        let g = grid();
        let r = build_torus_grid(g, OmegaChoice::StandardDarboux, |x| {
            if x == [0.5, 0.5, 0.5, 0.5] {
                standard_j() * 1.01
            } else {
                standard_j()
            }
        });
        assert!(matches!(r, Err(Error::Compatibility { .. })));
        let r = build_torus_grid(g, OmegaChoice::StandardDarboux, |_| -standard_j());
        assert!(matches!(r, Err(Error::Compatibility { .. })));
    }

    #[test]
    fn j_on_one_forms_squares_to_minus_one() {
        let t = flat_triple(grid()).unwrap();
        let dx0 = FormField::basis_form(*t.grid(), 0b0001);
        let j1 = t.j_act(&dx0).unwrap();
        assert_eq!(j1.at(0)[1], 1.0);
        let j2 = t.j_act(&j1).unwrap();
        assert!(j2.add(&dx0).sup_norm() < 1e-15);
        let jw = t.j_act(t.omega()).unwrap();
        assert!(jw.sub(t.omega()).sup_norm() < 1e-15);
    }

    #[test]
    fn contraction_of_omega_is_two() {
        let t = flat_triple(grid()).unwrap();
        let l = t.contraction(t.omega()).unwrap();
        assert!(l.comps[0].iter().all(|&v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn star_of_omega_is_omega() {
        let t = flat_triple(grid()).unwrap();
        let s = t.hodge_star(t.omega()).unwrap();
        assert!(s.sub(t.omega()).sup_norm() < 1e-15);
    }
}
