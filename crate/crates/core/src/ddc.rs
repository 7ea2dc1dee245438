//! Potentials for exact J-invariant forms and the identities built on them.

use nalgebra::{DMatrix, Matrix4};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{d_scalar, dc_scalar, LaplacianKind, SpectralCache};
use crate::curvature::hermitian_connection;
use crate::error::{Error, Result};
use crate::forms::{FormField, ScalarField};
use crate::structure::{omega_matrix, CompatibleTriple};
use crate::tolerances;

/// `d𝔾d^c f` for the metric Green operator of the cache.
pub fn dgdc(cache: &SpectralCache, f: &ScalarField) -> Result<FormField> {
    let dcf = dc_scalar(cache, f)?;
    let g = cache.green(&dcf, LaplacianKind::Metric)?;
    cache.exterior_d(&g)
}

/// `𝔾dd^c f`, the other side of the Lemma 1 equality.
pub fn gddc(cache: &SpectralCache, f: &FormField) -> Result<FormField> {
    let ddc = cache.exterior_d(&cache.twisted_d(f)?)?;
    cache.green(&ddc, LaplacianKind::Metric)
}

/// Potential together with its recomputed image.
#[derive(Debug, Clone)]
pub struct PotentialResult {
    pub potential: FormField,
    /// `d𝔾d^c(potential)`.
    pub reconstruction: FormField,
    /// `‖ψ − reconstruction‖ / ‖ψ‖`.
    pub residual: f64,
    /// `‖d𝔾d^c ψ̃ − 𝔾dd^c ψ̃‖ / ‖ψ‖`.
    pub equality_residual: f64,
    /// Weighted mean removed from a scalar potential.
    pub removed_mean: f64,
}

fn rel(cache: &SpectralCache, a: &FormField, b: &FormField) -> f64 {
    let nb = cache.l2_norm(b);
    let d = cache.l2_norm(&a.sub(b));
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

fn check_invariant_exact(cache: &SpectralCache, psi: &FormField) -> Result<()> {
    let scale = cache.l2_norm(psi);
    if scale == 0.0 {
        return Ok(());
    }
    let jpsi = cache.j_act(psi)?;
    let ratio = cache.l2_norm(&psi.sub(&jpsi)) / scale;
    if ratio > tolerances::INVARIANCE {
        return Err(Error::NotInvariant { ratio });
    }
    let h = cache.l2_norm(&cache.harmonic_project(psi, LaplacianKind::Metric)?) / scale;
    if h > tolerances::INVARIANCE {
        return Err(Error::NotExact(format!("harmonic part ratio {h:.3e}")));
    }
    if psi.degree < 4 {
        let d = cache.l2_norm(&cache.exterior_d(psi)?) / (scale * cache.spectral().max_wavenumber());
        if d > tolerances::INVARIANCE {
            return Err(Error::NotExact(format!("not closed, |dψ| ratio {d:.3e}")));
        }
    }
    Ok(())
}

/// Removes from `f` the components that make `d𝔾d^c f` fail to be J-invariant,
/// i.e. makes `f₀ω` orthogonal to the harmonic 2-forms.
pub fn invariant_admissible(cache: &SpectralCache, f: &ScalarField) -> Result<ScalarField> {
    let mut f = cache.zero_mean(f);
    let dirs: Vec<ScalarField> = cache
        .harmonic_basis(2, LaplacianKind::Metric)?
        .iter()
        .map(|h| cache.pointwise_inner(h, cache.omega()).map(|s| cache.zero_mean(&s)))
        .collect::<Result<_>>()?;
    let mut ortho: Vec<ScalarField> = Vec::new();
    for d in dirs {
        let mut d = d;
        for _ in 0..2 {
            for o in &ortho {
                let c = cache.l2_inner_scalar(&d.values, &o.values);
                d = d.sub(&o.scaled(c));
            }
        }
        let n = cache.l2_inner_scalar(&d.values, &d.values).sqrt();
        if n > 1e-10 {
            ortho.push(d.scaled(1.0 / n));
        }
    }
    for o in &ortho {
        let c = cache.l2_inner_scalar(&f.values, &o.values);
        f = f.sub(&o.scaled(c));
    }
    Ok(f)
}

/// Lemma 1: `ψ̃ = −Λ_ω(ψ_{H^c}) − δ^gδ^c𝔾^cψ`, so that `ψ = d𝔾d^cψ̃ = 𝔾dd^cψ̃`.
pub fn lemma1_potential(cache: &SpectralCache, psi: &FormField) -> Result<PotentialResult> {
    if psi.degree < 2 {
        return Err(Error::Degree(format!("Lemma 1 needs degree ≥ 2, got {}", psi.degree)));
    }
    check_invariant_exact(cache, psi)?;
    let hc = cache.harmonic_project(psi, LaplacianKind::Twisted)?;
    let gc = cache.green(psi, LaplacianKind::Twisted)?;
    let mut potential = cache.contraction(&hc)?.scaled(-1.0);
    potential.axpy(-1.0, &cache.codifferential(&cache.twisted_codifferential(&gc)?)?);
    let mut removed_mean = 0.0;
    if potential.degree == 0 {
        removed_mean = cache.mean(&potential.comps[0]);
        potential.comps[0].iter_mut().for_each(|v| *v -= removed_mean);
    }
    let reconstruction = {
        let dc = cache.twisted_d(&potential)?;
        cache.exterior_d(&cache.green(&dc, LaplacianKind::Metric)?)?
    };
    let other = gddc(cache, &potential)?;
    let scale = cache.l2_norm(psi);
    let residual = rel(cache, &reconstruction, psi);
    let eq = cache.l2_norm(&reconstruction.sub(&other));
    Ok(PotentialResult {
        potential,
        reconstruction,
        residual,
        equality_residual: if scale == 0.0 { eq } else { eq / scale },
        removed_mean,
    })
}

#[derive(Debug, Clone)]
pub struct Prop2Result {
    pub potential: ScalarField,
    pub residual: f64,
    /// Potential from the trace identity `g(d𝔾d^c f, ω) = −f`.
    pub trace_potential: ScalarField,
    /// `‖f − f_trace‖ / ‖f‖` after mean removal.
    pub uniqueness_gap: f64,
}

/// Proposition 2: zero-mean f with `ψ₁ − ψ₂ = d𝔾d^c f`.
pub fn prop2_potential(cache: &SpectralCache, psi1: &FormField, psi2: &FormField) -> Result<Prop2Result> {
    psi1.check_compatible(psi2)?;
    let h1 = cache.harmonic_project(psi1, LaplacianKind::Metric)?;
    let h2 = cache.harmonic_project(psi2, LaplacianKind::Metric)?;
    let scale = cache.l2_norm(psi1).max(cache.l2_norm(psi2)).max(f64::MIN_POSITIVE);
    let difference = cache.l2_norm(&h1.sub(&h2)) / scale;
    if difference > tolerances::INVARIANCE {
        return Err(Error::ClassMismatch { difference });
    }
    let diff = psi1.sub(psi2);
    let lemma = lemma1_potential(cache, &diff)?;
    let f = lemma.potential.to_scalar()?;
    let trace = cache.pointwise_inner(&diff, cache.omega())?.scaled(-1.0);
    let trace = cache.zero_mean(&trace);
    let nf = cache.l2_inner_scalar(&f.values, &f.values).sqrt();
    let gap = {
        let d = f.sub(&trace);
        let nd = cache.l2_inner_scalar(&d.values, &d.values).sqrt();
        if nf == 0.0 {
            nd
        } else {
            nd / nf
        }
    };
    Ok(Prop2Result { potential: f, residual: lemma.residual, trace_potential: trace, uniqueness_gap: gap })
}

/// Singular values of `f ↦ d𝔾d^c f` on real band-limited functions (no Nyquist content).
pub fn dgdc_singular_values(cache: &SpectralCache) -> Result<Vec<f64>> {
    let grid = *cache.grid();
    let sp = cache.spectral();
    let n = grid.len();
    let in_band = |i: usize| {
        let m = grid.multi_index(i);
        (0..4).all(|a| m[a] != grid.resolution[a] / 2)
    };
    let neg = |i: usize| {
        let m = grid.multi_index(i);
        grid.linear_index(std::array::from_fn(|a| (grid.resolution[a] - m[a]) % grid.resolution[a]))
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let j = neg(i);
        if !in_band(i) || j < i {
            continue;
        }
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        spec[i] += Complex64::new(1.0, 0.0);
        spec[j] += Complex64::new(1.0, 0.0);
        basis.push(sp.synthesize(&[spec.clone()]).pop().unwrap());
        if j != i {
            let mut spec = vec![Complex64::new(0.0, 0.0); n];
            spec[i] = Complex64::new(0.0, 1.0);
            spec[j] = Complex64::new(0.0, -1.0);
            basis.push(sp.synthesize(&[spec]).pop().unwrap());
        }
    }
    let cols: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| {
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let f = ScalarField { grid, values: b.iter().map(|v| v / nb).collect() };
            dgdc(cache, &f).map(|w| w.flatten())
        })
        .collect::<Result<_>>()?;
    let m = DMatrix::from_fn(cols[0].len(), cols.len(), |r, c| cols[c][r]);
    let mut sv: Vec<f64> = m.singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sv)
}

/// Numerical rank deficiency from singular values with a relative cutoff.
pub fn rank_deficiency(singular_values: &[f64], rel_cutoff: f64) -> usize {
    let top = singular_values.first().copied().unwrap_or(0.0);
    singular_values.iter().filter(|&&s| s <= rel_cutoff * top).count()
}

#[derive(Debug, Clone)]
pub struct Prop3Result {
    pub lhs: FormField,
    pub rhs: FormField,
    /// `‖lhs − rhs‖ / ‖d𝔾d^c f‖`.
    pub residual: f64,
    /// `‖lhs‖ / ‖d𝔾d^c f‖`.
    pub anti_invariant_ratio: f64,
}

/// Proposition 3: `(d𝔾d^cf)^{J,−} = ½(f₀ω)_H − ¼ g((f₀ω)_H, ω) ω`.
pub fn prop3_identity(cache: &SpectralCache, f: &ScalarField) -> Result<Prop3Result> {
    let full = dgdc(cache, f)?;
    let lhs = cache.anti_invariant_part(&full)?;
    let f0 = cache.zero_mean(f);
    let fw = cache.omega().mul_scalar_field(&f0.values);
    let h = cache.harmonic_project(&fw, LaplacianKind::Metric)?;
    let trace = cache.pointwise_inner(&h, cache.omega())?;
    let rhs = h.scaled(0.5).sub(&cache.omega().mul_scalar_field(&trace.scaled(0.25).values));
    let nl = cache.l2_norm(&lhs);
    let d = cache.l2_norm(&lhs.sub(&rhs));
    let nfull = cache.l2_norm(&full);
    Ok(Prop3Result {
        residual: if nfull > 0.0 { d / nfull } else { d },
        anti_invariant_ratio: if nfull > 0.0 { nl / nfull } else { 0.0 },
        lhs,
        rhs,
    })
}

/// Lie derivative `𝔏_X J` for a vector field given by components `X^a`.
pub fn lie_derivative_j(triple: &CompatibleTriple, x: &[Vec<f64>; 4]) -> Vec<Matrix4<f64>> {
    let sp = triple.spectral();
    let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    let dx = sp.gradients(&refs);
    let dj = crate::curvature::matrix_gradients(sp, &[&triple.j_field().j]).pop().unwrap();
    (0..triple.grid().len())
        .map(|i| {
            let j = triple.j(i);
            // (𝔏_X J) = X^c ∂_c J − [∂X, J] with (∂X)^a_c = ∂_c X^a
            let mut xdj = Matrix4::zeros();
            for c in 0..4 {
                xdj += dj[i][c] * x[c][i];
            }
            let grad_x = Matrix4::from_fn(|a, c| dx[a][c][i]);
            xdj - (grad_x * j - j * grad_x)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Corollary2Result {
    pub xi: FormField,
    pub harmonic_c_part: FormField,
    pub u: ScalarField,
    pub v: ScalarField,
    /// `‖ξ − (ξ_{H^c} + d^c u − J𝔾d^c v)‖ / ‖ξ‖`.
    pub residual: f64,
    pub holomorphy_defect: f64,
    /// Pairwise L² cosines between the three parts.
    pub cosines: [f64; 3],
}

/// Corollary 2: `ξ = ξ_{H^c} + d^c u − J𝔾d^c v` for `ξ = X^♭`, X holomorphic.
pub fn corollary2_decompose(cache: &SpectralCache, x: &[Vec<f64>; 4]) -> Result<Corollary2Result> {
    let grid = *cache.grid();
    let lie = lie_derivative_j(cache, x);
    let xmax = x.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let lmax = lie.iter().fold(0.0f64, |m, l| m.max(l.amax()));
    let holomorphy_defect = if xmax > 0.0 { lmax / xmax } else { lmax };
    if holomorphy_defect > tolerances::HOLOMORPHY {
        return Err(Error::NotHolomorphic { residual: holomorphy_defect });
    }
    let xi = FormField::from_points(
        grid,
        1,
        &(0..grid.len())
            .map(|i| {
                let g = cache.g(i);
                let mut out = [0.0; 6];
                for a in 0..4 {
                    out[a] = (0..4).map(|b| g[(a, b)] * x[b][i]).sum();
                }
                out
            })
            .collect::<Vec<_>>(),
    );
    let harmonic_c_part = cache.harmonic_project(&xi, LaplacianKind::Twisted)?;
    let gc = cache.green(&xi, LaplacianKind::Twisted)?;
    let u = cache.zero_mean(&cache.twisted_codifferential(&gc)?.to_scalar()?);
    let djxi = cache.exterior_d(&cache.j_act(&xi)?)?;
    let negligible = tolerances::ALGEBRAIC * cache.spectral().max_wavenumber() * cache.l2_norm(&xi);
    let v = if cache.l2_norm(&djxi) <= negligible {
        ScalarField::zeros(grid)
    } else {
        lemma1_potential(cache, &djxi)?.potential.to_scalar()?
    };
    let part_u = dc_scalar(cache, &u)?;
    let part_v = cache
        .j_act(&cache.green(&dc_scalar(cache, &v)?, LaplacianKind::Metric)?)?
        .scaled(-1.0);
    let recon = harmonic_c_part.add(&part_u).add(&part_v);
    let residual = rel(cache, &recon, &xi);
    let parts = [&harmonic_c_part, &part_u, &part_v];
    let cos = |a: &FormField, b: &FormField| -> Result<f64> {
        let na = cache.l2_norm(a);
        let nb = cache.l2_norm(b);
        Ok(if na * nb == 0.0 { 0.0 } else { cache.l2_inner(a, b)? / (na * nb) })
    };
    let cosines = [cos(parts[0], parts[1])?, cos(parts[0], parts[2])?, cos(parts[1], parts[2])?];
    Ok(Corollary2Result { xi, harmonic_c_part, u, v, residual, holomorphy_defect, cosines })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeinkoveReport {
    pub residual: f64,
    /// `‖2dδ𝔾 D_{(dφ)♯}ω‖ / ‖d𝔾d^c f‖`, zero in the Kähler case.
    pub correction_ratio: f64,
}

/// `d𝔾d^cf = dd^cφ − 2dδ^g𝔾D^g_{(dφ)♯}ω` with `φ = 𝔾f`.
pub fn weinkove_identity(cache: &SpectralCache, f: &ScalarField) -> Result<WeinkoveReport> {
    let grid = *cache.grid();
    let lhs = dgdc(cache, f)?;
    let phi = cache.green_scalar(f, LaplacianKind::Metric)?;
    let ddc_phi = cache.exterior_d(&dc_scalar(cache, &phi)?)?;
    let dphi = d_scalar(cache, &phi)?;
    let conn = hermitian_connection(cache)?;
    let refs: Vec<&[f64]> = cache.omega().comps.iter().map(Vec::as_slice).collect();
    let domega = cache.spectral().gradients(&refs);
    let pairs: Vec<(usize, usize)> = crate::forms::basis(2)
        .iter()
        .map(|&m| (m.trailing_zeros() as usize, 7 - m.leading_zeros() as usize))
        .collect();
    let vals: Vec<[f64; 6]> = (0..grid.len())
        .map(|i| {
            let ginv = cache.ginv(i);
            let dp = dphi.at(i);
            let w = omega_matrix(&cache.omega().at(i));
            let mut dxw = Matrix4::zeros();
            for a in 0..4 {
                let xa: f64 = (0..4).map(|b| ginv[(a, b)] * dp[b]).sum();
                let dw = omega_matrix(&std::array::from_fn(|c| domega[c][a][i]));
                let gam = &conn.levi_civita[i][a];
                dxw += (dw - gam.transpose() * w - w * gam) * xa;
            }
            let mut out = [0.0; 6];
            for (k, &(b, c)) in pairs.iter().enumerate() {
                out[k] = dxw[(b, c)];
            }
            out
        })
        .collect();
    let dxomega = FormField::from_points(grid, 2, &vals);
    let g2 = cache.green(&dxomega, LaplacianKind::Metric)?;
    let correction = cache.exterior_d(&cache.codifferential(&g2)?)?.scaled(2.0);
    let rhs = ddc_phi.sub(&correction);
    let nl = cache.l2_norm(&lhs);
    Ok(WeinkoveReport {
        residual: if nl > 0.0 { cache.l2_norm(&lhs.sub(&rhs)) / nl } else { cache.l2_norm(&rhs) },
        correction_ratio: if nl > 0.0 { cache.l2_norm(&correction) / nl } else { 0.0 },
    })
}
