//! Exterior calculus on a compatible triple: d, δ, the twisted pair
//! d^c, δ^c, Laplacians, harmonic spaces and Green operators.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix4};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::forms::{basis, n_components, position, wedge_sign, FormField, ScalarField};
use crate::krylov::{self, KrylovStats};
use crate::structure::CompatibleTriple;
use crate::tolerances;

/// Betti numbers of T⁴.
pub const TORUS_BETTI: [usize; 5] = [1, 4, 6, 4, 1];

/// Which Laplacian: `Δ^g = dδ + δd` or `Δ^c = d^cδ^c + δ^cd^c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    Metric,
    Twisted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    FlatLaplacian,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenSolveConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
}

impl Default for GreenSolveConfig {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 10_000, preconditioner: Preconditioner::FlatLaplacian }
    }
}

impl GreenSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config(format!("green tolerance {} not in (0, 1)", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("green max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Spectral exterior derivative.
pub fn exterior_d(sp: &Spectral, psi: &FormField) -> Result<FormField> {
    let p = psi.degree;
    if p >= 4 {
        return Err(Error::Degree("d of a 4-form".into()));
    }
    sp.grid().check_same(&psi.grid)?;
    let refs: Vec<&[f64]> = psi.comps.iter().map(Vec::as_slice).collect();
    let spec = sp.spectra(&refs);
    let n = psi.grid.len();
    let outs: Vec<Vec<Complex64>> = basis(p + 1)
        .par_iter()
        .map(|&k| {
            let terms: Vec<(usize, usize, f64)> = (0..4)
                .filter(|a| k & (1 << a) != 0)
                .map(|a| {
                    let src = k ^ (1 << a);
                    (a, position(src), wedge_sign(1 << a, src))
                })
                .collect();
            (0..n)
                .map(|i| {
                    let kv = sp.wavevector(i);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(a, c, s) in &terms {
                        acc += spec[c][i] * (s * kv[a]);
                    }
                    Complex64::new(-acc.im, acc.re)
                })
                .collect()
        })
        .collect();
    let comps = sp.synthesize(&outs);
    Ok(FormField { grid: psi.grid, degree: p + 1, comps })
}

/// `δ^g = −∗d∗`.
pub fn codifferential(triple: &CompatibleTriple, psi: &FormField) -> Result<FormField> {
    if psi.degree == 0 {
        return Err(Error::Degree("δ of a function".into()));
    }
    let s = triple.hodge_star(psi)?;
    let ds = exterior_d(triple.spectral(), &s)?;
    Ok(triple.hodge_star(&ds)?.scaled(-1.0))
}

/// `d^c = (−1)^p J d J` on p-forms.
pub fn twisted_d(triple: &CompatibleTriple, psi: &FormField) -> Result<FormField> {
    let jp = triple.j_act(psi)?;
    let djp = exterior_d(triple.spectral(), &jp)?;
    let out = triple.j_act(&djp)?;
    Ok(if psi.degree % 2 == 1 { out.scaled(-1.0) } else { out })
}

/// `δ^c = (−1)^p J δ^g J` on p-forms.
pub fn twisted_codifferential(triple: &CompatibleTriple, psi: &FormField) -> Result<FormField> {
    let jp = triple.j_act(psi)?;
    let djp = codifferential(triple, &jp)?;
    let out = triple.j_act(&djp)?;
    Ok(if psi.degree % 2 == 1 { out.scaled(-1.0) } else { out })
}

/// Laplacian of either kind; degree-0 and degree-4 terms drop the missing half.
pub fn laplacian(triple: &CompatibleTriple, psi: &FormField, kind: LaplacianKind) -> Result<FormField> {
    let (d, delta): (fn(&CompatibleTriple, &FormField) -> Result<FormField>, fn(&CompatibleTriple, &FormField) -> Result<FormField>) =
        match kind {
            LaplacianKind::Metric => (|t, x| exterior_d(t.spectral(), x), codifferential),
            LaplacianKind::Twisted => (twisted_d, twisted_codifferential),
        };
    let p = psi.degree;
    let mut out = FormField::zeros(psi.grid, p);
    if p < 4 {
        out.axpy(1.0, &delta(triple, &d(triple, psi)?)?);
    }
    if p > 0 {
        out.axpy(1.0, &d(triple, &delta(triple, psi)?)?);
    }
    Ok(out)
}

/// Scalar-field convenience: `d f`.
pub fn d_scalar(triple: &CompatibleTriple, f: &ScalarField) -> Result<FormField> {
    exterior_d(triple.spectral(), &f.as_form())
}

/// Scalar-field convenience: `d^c f`.
pub fn dc_scalar(triple: &CompatibleTriple, f: &ScalarField) -> Result<FormField> {
    twisted_d(triple, &f.as_form())
}

/// Harmonic part and the two potentials of a Hodge decomposition:
/// `ψ = harmonic + D(exact_potential) + D*(coexact_potential)` with
/// `(D, D*) = (d, δ^g)` or `(d^c, δ^c)`.
#[derive(Debug, Clone)]
pub struct HodgeParts {
    pub harmonic: FormField,
    pub exact_potential: Option<FormField>,
    pub coexact_potential: Option<FormField>,
}

struct Precond {
    /// `ḡ^{ab} k_a k_b` per mode, with corner modes set to one.
    symbol: Vec<f64>,
    /// Inverse of the mean of `cellvol · vol · Λ^p(g⁻¹)`, per degree.
    weight_inv: [DMatrix<f64>; 5],
}

/// A compatible triple with its Green operators and lazily-built harmonic spaces.
pub struct SpectralCache {
    triple: CompatibleTriple,
    cfg: GreenSolveConfig,
    precond: Precond,
    harmonic: [[OnceLock<std::result::Result<Vec<FormField>, Error>>; 5]; 2],
    corners: OnceLock<Vec<Vec<f64>>>,
}

impl std::fmt::Debug for SpectralCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralCache").field("grid", self.triple.grid()).field("cfg", &self.cfg).finish()
    }
}

impl std::ops::Deref for SpectralCache {
    type Target = CompatibleTriple;
    fn deref(&self) -> &CompatibleTriple {
        &self.triple
    }
}

fn kind_index(kind: LaplacianKind) -> usize {
    match kind {
        LaplacianKind::Metric => 0,
        LaplacianKind::Twisted => 1,
    }
}

impl SpectralCache {
    pub fn new(triple: CompatibleTriple, cfg: GreenSolveConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = *triple.grid();
        let n = grid.len();
        let mut gbar = Matrix4::zeros();
        for i in 0..n {
            gbar += triple.ginv(i);
        }
        gbar /= n as f64;
        let sp = triple.spectral();
        let symbol = (0..n)
            .map(|i| {
                if sp.is_corner_mode(i) {
                    return 1.0;
                }
                let k = sp.wavevector(i);
                let mut s = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        s += gbar[(a, b)] * k[a] * k[b];
                    }
                }
                s
            })
            .collect();
        let cell = grid.cell_volume();
        let weight_inv = std::array::from_fn(|p| {
            let nc = n_components(p);
            let mut w = DMatrix::zeros(nc, nc);
            for i in 0..n {
                let gp = triple.form_metric(i, p);
                let v = triple.volume_density()[i];
                for r in 0..nc {
                    for c in 0..nc {
                        w[(r, c)] += gp.m[r][c] * v;
                    }
                }
            }
            (w * (cell / n as f64)).try_inverse().expect("mean metric is positive definite")
        });
        Ok(Self {
            triple,
            cfg,
            precond: Precond { symbol, weight_inv },
            harmonic: Default::default(),
            corners: OnceLock::new(),
        })
    }

    pub fn triple(&self) -> &CompatibleTriple {
        &self.triple
    }

    pub fn config(&self) -> &GreenSolveConfig {
        &self.cfg
    }

    pub fn exterior_d(&self, psi: &FormField) -> Result<FormField> {
        exterior_d(self.triple.spectral(), psi)
    }

    pub fn codifferential(&self, psi: &FormField) -> Result<FormField> {
        codifferential(&self.triple, psi)
    }

    pub fn twisted_d(&self, psi: &FormField) -> Result<FormField> {
        twisted_d(&self.triple, psi)
    }

    pub fn twisted_codifferential(&self, psi: &FormField) -> Result<FormField> {
        twisted_codifferential(&self.triple, psi)
    }

    pub fn laplacian(&self, psi: &FormField, kind: LaplacianKind) -> Result<FormField> {
        laplacian(&self.triple, psi, kind)
    }

    fn d_kind(&self, psi: &FormField, kind: LaplacianKind) -> Result<FormField> {
        match kind {
            LaplacianKind::Metric => self.exterior_d(psi),
            LaplacianKind::Twisted => self.twisted_d(psi),
        }
    }

    fn delta_kind(&self, psi: &FormField, kind: LaplacianKind) -> Result<FormField> {
        match kind {
            LaplacianKind::Metric => self.codifferential(psi),
            LaplacianKind::Twisted => self.twisted_codifferential(psi),
        }
    }

    /// Smallest nonzero eigenvalue of the flat unit-torus Laplacian scaled to the periods.
    pub fn spectral_gap_scale(&self) -> f64 {
        let lmax = self.triple.grid().period.iter().cloned().fold(0.0, f64::max);
        4.0 * std::f64::consts::PI.powi(2) / (lmax * lmax)
    }

    /// L²-orthonormal basis of the kernel of the chosen Laplacian in degree `p`.
    pub fn harmonic_basis(&self, p: usize, kind: LaplacianKind) -> Result<&[FormField]> {
        if p > 4 {
            return Err(Error::Degree(format!("degree {p} out of range")));
        }
        let slot = &self.harmonic[kind_index(kind)][p];
        match slot.get_or_init(|| self.build_harmonic(p, kind)) {
            Ok(v) => Ok(v.as_slice()),
            Err(e) => Err(e.clone()),
        }
    }

    fn build_harmonic(&self, p: usize, kind: LaplacianKind) -> Result<Vec<FormField>> {
        let grid = *self.triple.grid();
        let raw: Vec<FormField> = match p {
            0 => vec![FormField::constant(grid, 0, &[1.0])],
            4 => vec![self.triple.hodge_star(&FormField::constant(grid, 0, &[1.0]))?],
            3 => {
                let h1 = self.harmonic_basis(1, kind)?;
                h1.iter().map(|h| self.triple.hodge_star(h)).collect::<Result<_>>()?
            }
            _ => {
                let mut out = Vec::new();
                for &mask in basis(p) {
                    let mut seed = FormField::basis_form(grid, mask);
                    if kind == LaplacianKind::Twisted {
                        seed = self.triple.j_act(&seed)?;
                    }
                    let rhs = self.delta_kind(&seed, kind)?.scaled(-1.0);
                    let pot = self.green(&rhs, kind)?;
                    out.push(seed.add(&self.d_kind(&pot, kind)?));
                }
                out
            }
        };
        let basis = self.orthonormalize(raw, p)?;
        if basis.len() != TORUS_BETTI[p] {
            return Err(Error::Spectrum { degree: p, reason: format!("found {} harmonic forms", basis.len()) });
        }
        let lam = self.spectral_gap_scale();
        for h in &basis {
            let r = self.triple.l2_norm(&self.laplacian(h, kind)?);
            if r > tolerances::HARMONIC * lam {
                return Err(Error::Spectrum {
                    degree: p,
                    reason: format!("|Δh| = {r:.3e} exceeds {:.3e}", tolerances::HARMONIC * lam),
                });
            }
        }
        Ok(basis)
    }

    /// Modified Gram–Schmidt in L² with a conditioning guard.
    fn orthonormalize(&self, raw: Vec<FormField>, p: usize) -> Result<Vec<FormField>> {
        let mut out: Vec<FormField> = Vec::with_capacity(raw.len());
        for mut v in raw {
            let n0 = self.triple.l2_norm(&v);
            for _ in 0..2 {
                for u in &out {
                    let c = self.triple.l2_inner(&v, u)?;
                    v.axpy(-c, u);
                }
            }
            let n1 = self.triple.l2_norm(&v);
            if n1 <= 1e-8 * n0 {
                return Err(Error::Spectrum { degree: p, reason: "harmonic seeds are linearly dependent".into() });
            }
            out.push(v.scaled(1.0 / n1));
        }
        Ok(out)
    }

    /// L²-orthogonal projection onto the harmonic space.
    pub fn harmonic_project(&self, psi: &FormField, kind: LaplacianKind) -> Result<FormField> {
        let basis = self.harmonic_basis(psi.degree, kind)?;
        let mut out = FormField::zeros(psi.grid, psi.degree);
        for h in basis {
            out.axpy(self.triple.l2_inner(psi, h)?, h);
        }
        Ok(out)
    }

    /// Non-constant functions annihilated by the spectral d (products of
    /// `(−1)^{i_a}` over nonempty axis subsets).
    fn corner_functions(&self) -> &[Vec<f64>] {
        self.corners.get_or_init(|| {
            let grid = *self.triple.grid();
            (1u8..16)
                .map(|s| {
                    (0..grid.len())
                        .map(|i| {
                            let m = grid.multi_index(i);
                            let parity: usize = (0..4).filter(|a| s & (1 << a) != 0).map(|a| m[a]).sum();
                            if parity % 2 == 0 {
                                1.0
                            } else {
                                -1.0
                            }
                        })
                        .collect()
                })
                .collect()
        })
    }

    /// Remove components along the lattice kernel of d on functions, in the volume-weighted inner product.
    fn deflate_scalar(&self, x: &mut [f64]) {
        let vol = self.triple.volume_density();
        let mut kernel: Vec<Vec<f64>> = vec![vec![1.0; x.len()]];
        kernel.extend(self.corner_functions().iter().cloned());
        let k = kernel.len();
        let ip = |a: &[f64], b: &[f64]| crate::grid::pairwise_sum_by(a.len(), &|i| a[i] * b[i] * vol[i]);
        let gram = DMatrix::from_fn(k, k, |r, c| ip(&kernel[r], &kernel[c]));
        let rhs = DVector::from_fn(k, |r, _| ip(&kernel[r], x));
        let coef = gram.lu().solve(&rhs).expect("corner Gram matrix is invertible");
        for (c, kv) in coef.iter().zip(&kernel) {
            for (xi, ki) in x.iter_mut().zip(kv) {
                *xi -= c * ki;
            }
        }
    }

    fn weight_apply(&self, x: &[f64], p: usize) -> Vec<f64> {
        let n = self.triple.grid().len();
        let nc = n_components(p);
        let cell = self.triple.grid().cell_volume();
        let vol = self.triple.volume_density();
        let vals: Vec<[f64; 6]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut v = [0.0; 6];
                for c in 0..nc {
                    v[c] = x[c * n + i];
                }
                let mut w = self.triple.form_metric(i, p).apply(&v);
                for wc in w.iter_mut().take(nc) {
                    *wc *= cell * vol[i];
                }
                w
            })
            .collect();
        let mut out = vec![0.0; nc * n];
        for (i, v) in vals.iter().enumerate() {
            for c in 0..nc {
                out[c * n + i] = v[c];
            }
        }
        out
    }

    fn precondition(&self, r: &[f64], p: usize) -> Vec<f64> {
        let grid = *self.triple.grid();
        let n = grid.len();
        let nc = n_components(p);
        let winv = &self.precond.weight_inv[p];
        let mut mixed = vec![0.0; nc * n];
        for i in 0..n {
            for a in 0..nc {
                let mut s = 0.0;
                for b in 0..nc {
                    s += winv[(a, b)] * r[b * n + i];
                }
                mixed[a * n + i] = s;
            }
        }
        let refs: Vec<&[f64]> = mixed.chunks(n).collect();
        let sym = &self.precond.symbol;
        let sp = self.triple.spectral();
        let spec: Vec<Vec<Complex64>> = sp
            .spectra(&refs)
            .into_iter()
            .map(|s| s.iter().zip(sym).map(|(z, t)| z / *t).collect())
            .collect();
        sp.synthesize(&spec).concat()
    }

    /// Green operator: the solution of `Δu = ψ − ψ_H` orthogonal to the harmonic space.
    pub fn green(&self, psi: &FormField, kind: LaplacianKind) -> Result<FormField> {
        self.green_with_stats(psi, kind).map(|(u, _)| u)
    }

    pub fn green_with_stats(&self, psi: &FormField, kind: LaplacianKind) -> Result<(FormField, KrylovStats)> {
        self.triple.grid().check_same(&psi.grid)?;
        let p = psi.degree;
        let grid = psi.grid;
        let rhs = if p == 0 {
            let mut v = psi.comps[0].clone();
            self.deflate_scalar(&mut v);
            FormField { grid, degree: 0, comps: vec![v] }
        } else {
            psi.sub(&self.harmonic_project(psi, kind)?)
        };
        let scale = psi.flatten().iter().map(|v| v * v).sum::<f64>().sqrt();
        if rhs.flatten().iter().map(|v| v * v).sum::<f64>().sqrt() <= tolerances::ROUNDOFF * scale {
            return Ok((FormField::zeros(grid, p), KrylovStats { iterations: 0, residual: 0.0 }));
        }
        if p == 4 {
            // Δ on top forms is conjugate to Δ on functions by ∗.
            let f = self.triple.hodge_star(&rhs)?;
            let (u, st) = self.green_with_stats(&f, kind)?;
            return Ok((self.triple.hodge_star(&u)?, st));
        }
        // On forms, spectral d degenerates on Nyquist modes and metric products alias
        // into them; the iteration is kept on the complementary band.
        let sp = self.triple.spectral();
        let band = |x: Vec<f64>| if p == 0 { x } else { sp.band_limit(&x) };
        let apply = |x: &[f64]| {
            let f = FormField::from_flat(grid, p, &band(x.to_vec()));
            let l = self.laplacian(&f, kind).expect("degree checked");
            band(self.weight_apply(&l.flatten(), p))
        };
        let b = band(self.weight_apply(&rhs.flatten(), p));
        let (x, stats) = match self.cfg.preconditioner {
            Preconditioner::FlatLaplacian => krylov::pcg(
                apply,
                |r| band(self.precondition(&band(r.to_vec()), p)),
                &b,
                self.cfg.tolerance,
                self.cfg.max_iterations,
            )?,
            Preconditioner::None => {
                krylov::pcg(apply, |r| band(r.to_vec()), &b, self.cfg.tolerance, self.cfg.max_iterations)?
            }
        };
        let mut u = FormField::from_flat(grid, p, &band(x));
        if p == 0 {
            self.deflate_scalar(&mut u.comps[0]);
        } else {
            u = u.sub(&self.harmonic_project(&u, kind)?);
        }
        Ok((u, stats))
    }

    pub fn green_scalar(&self, f: &ScalarField, kind: LaplacianKind) -> Result<ScalarField> {
        self.green(&f.as_form(), kind)?.to_scalar()
    }

    /// `ψ = ψ_H + D(D*𝔾ψ) + D*(D𝔾ψ)` for `(D, D*)` of the chosen kind.
    pub fn hodge_decompose(&self, psi: &FormField, kind: LaplacianKind) -> Result<HodgeParts> {
        let harmonic = self.harmonic_project(psi, kind)?;
        let g = self.green(psi, kind)?;
        let p = psi.degree;
        let exact_potential = if p > 0 { Some(self.delta_kind(&g, kind)?) } else { None };
        let coexact_potential = if p < 4 { Some(self.d_kind(&g, kind)?) } else { None };
        Ok(HodgeParts { harmonic, exact_potential, coexact_potential })
    }

    /// Reassemble a decomposition from its potentials.
    pub fn hodge_reassemble(&self, parts: &HodgeParts, kind: LaplacianKind) -> Result<FormField> {
        let mut out = parts.harmonic.clone();
        if let Some(a) = &parts.exact_potential {
            out.axpy(1.0, &self.d_kind(a, kind)?);
        }
        if let Some(b) = &parts.coexact_potential {
            out.axpy(1.0, &self.delta_kind(b, kind)?);
        }
        Ok(out)
    }

    /// Anti-invariant part of a 2-form relative to its norm.
    pub fn anti_invariant_ratio(&self, psi: &FormField) -> Result<f64> {
        let anti = self.triple.anti_invariant_part(psi)?;
        let n = self.triple.l2_norm(psi);
        Ok(if n == 0.0 { 0.0 } else { self.triple.l2_norm(&anti) / n })
    }
}
