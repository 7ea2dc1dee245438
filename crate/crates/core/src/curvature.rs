//! Hermitian connection `∇ = D^g − ½J(D^gJ)`, its curvature, the Hermitian
//! Ricci form and the Hermitian scalar curvature.

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{dc_scalar, exterior_d, SpectralCache};
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::forms::{basis, wedge, FormField, ScalarField};
use crate::grid::GridSpec;
use crate::structure::{pfaffian, CompatibleTriple};
use crate::tolerances;

/// Per-point matrices indexed by a direction.
pub type MatrixFrame = [Matrix4<f64>; 4];

/// Connection data on the lattice. For each direction `a`, `h[i][a]` is the
/// matrix with `∇_{e_a} e_c = Σ_b h[i][a][(b, c)] e_b`.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub grid: GridSpec,
    /// Levi-Civita connection matrices `Γ_a[b][c] = Γ^b_{ac}`.
    pub levi_civita: Vec<MatrixFrame>,
    /// Coordinate derivatives `∂_a J`.
    pub dj: Vec<MatrixFrame>,
    /// Coordinate derivatives `∂_a g`.
    pub dg: Vec<MatrixFrame>,
    /// Hermitian connection matrices.
    pub hermitian: Vec<MatrixFrame>,
}

/// Curvature outputs of the Hermitian connection.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub ricci_form: FormField,
    pub scalar: ScalarField,
    /// `R_{ab}` for the six pairs `a < b` in basis order, when requested.
    pub raw: Option<Vec<[Matrix4<f64>; 6]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureRoute {
    /// Ricci form through `θ_b = tr(J H_b)`; no raw curvature.
    Trace,
    /// Full `R_{ab}` assembled first, then traced.
    Full,
}

fn matrix_entries(m: &[Matrix4<f64>]) -> Vec<Vec<f64>> {
    (0..16).map(|e| m.iter().map(|x| x[(e % 4, e / 4)]).collect()).collect()
}

/// `∂_a M` for several matrix fields at once.
pub fn matrix_gradients(sp: &Spectral, fields: &[&[Matrix4<f64>]]) -> Vec<Vec<MatrixFrame>> {
    let entries: Vec<Vec<f64>> = fields.iter().flat_map(|f| matrix_entries(f)).collect();
    let refs: Vec<&[f64]> = entries.iter().map(Vec::as_slice).collect();
    let grads = sp.gradients(&refs);
    let n = sp.grid().len();
    fields
        .iter()
        .enumerate()
        .map(|(f, _)| {
            (0..n)
                .map(|i| {
                    std::array::from_fn(|a| Matrix4::from_fn(|r, c| grads[16 * f + r + 4 * c][a][i]))
                })
                .collect()
        })
        .collect()
}

fn metric_entries(triple: &CompatibleTriple) -> Vec<Matrix4<f64>> {
    (0..triple.grid().len()).map(|i| *triple.g(i)).collect()
}

/// Refuse to differentiate fields with energy in the top of the spectrum.
pub fn check_resolution(triple: &CompatibleTriple) -> Result<()> {
    let sp = triple.spectral();
    let g = metric_entries(triple);
    for (name, field) in [("metric", g), ("almost-complex structure", triple.j_field().j.clone())] {
        let entries = matrix_entries(&field);
        let refs: Vec<&[f64]> = entries.iter().map(Vec::as_slice).collect();
        let ratio = sp.top_mode_ratio(&refs);
        if ratio > tolerances::ALIASING {
            return Err(Error::Resolution { field: name.into(), ratio });
        }
    }
    Ok(())
}

/// Levi-Civita and Hermitian connections from spectral derivatives of g and J.
pub fn hermitian_connection(triple: &CompatibleTriple) -> Result<ConnectionField> {
    check_resolution(triple)?;
    let grid = *triple.grid();
    let g = metric_entries(triple);
    let mut grads = matrix_gradients(triple.spectral(), &[&g, &triple.j_field().j]).into_iter();
    let dg = grads.next().unwrap();
    let dj = grads.next().unwrap();
    let (levi_civita, hermitian): (Vec<MatrixFrame>, Vec<MatrixFrame>) = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let ginv = triple.ginv(i);
            let j = triple.j(i);
            let dgi = &dg[i];
            // Γ^k_{ac} = ½ g^{kl}(∂_a g_{cl} + ∂_c g_{al} − ∂_l g_{ac})
            let lc: MatrixFrame = std::array::from_fn(|a| {
                Matrix4::from_fn(|k, c| {
                    let mut s = 0.0;
                    for l in 0..4 {
                        s += ginv[(k, l)] * (dgi[a][(c, l)] + dgi[c][(a, l)] - dgi[l][(a, c)]);
                    }
                    0.5 * s
                })
            });
            let herm: MatrixFrame = std::array::from_fn(|a| {
                let dja = dj[i][a] + lc[a] * j - j * lc[a];
                lc[a] - 0.5 * j * dja
            });
            (lc, herm)
        })
        .unzip();
    Ok(ConnectionField { grid, levi_civita, dj, dg, hermitian })
}

impl ConnectionField {
    /// `D^g_a J` at point `i`.
    pub fn levi_civita_dj(&self, triple: &CompatibleTriple, i: usize, a: usize) -> Matrix4<f64> {
        let j = triple.j(i);
        self.dj[i][a] + self.levi_civita[i][a] * j - j * self.levi_civita[i][a]
    }

    /// `max |∇g| / max(|∂g|, |g||H|)` over the lattice.
    pub fn metric_residual(&self, triple: &CompatibleTriple) -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..self.grid.len() {
            let g = triple.g(i);
            for a in 0..4 {
                let h = &self.hermitian[i][a];
                let r = self.dg[i][a] - h.transpose() * g - g * h;
                num = num.max(r.amax());
                den = den.max(self.dg[i][a].amax()).max(g.amax() * h.amax());
            }
        }
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    /// `max |∇J| / max(|∂J|, |J||H|)` over the lattice.
    pub fn j_residual(&self, triple: &CompatibleTriple) -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..self.grid.len() {
            let j = triple.j(i);
            for a in 0..4 {
                let h = &self.hermitian[i][a];
                let r = self.dj[i][a] + h * j - j * h;
                num = num.max(r.amax());
                den = den.max(self.dj[i][a].amax()).max(j.amax() * h.amax());
            }
        }
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    /// Sup-norm of the torsion `T^b_{ac} = H_a[b][c] − H_c[b][a]`.
    pub fn torsion_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for frame in &self.hermitian {
            for a in 0..4 {
                for c in 0..4 {
                    for b in 0..4 {
                        m = m.max((frame[a][(b, c)] - frame[c][(b, a)]).abs());
                    }
                }
            }
        }
        m
    }

    /// Sup-norm of `D^g J`, which vanishes exactly when the structure is Kähler.
    pub fn dj_norm(&self, triple: &CompatibleTriple) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.grid.len() {
            for a in 0..4 {
                m = m.max(self.levi_civita_dj(triple, i, a).amax());
            }
        }
        m
    }
}

fn pair_indices() -> [(usize, usize); 6] {
    let mut out = [(0, 0); 6];
    for (k, &m) in basis(2).iter().enumerate() {
        out[k] = (m.trailing_zeros() as usize, 7 - m.leading_zeros() as usize);
    }
    out
}

/// Hermitian Ricci form `ρ_{ab} = ½ tr(J R_{ab})` and scalar curvature.
pub fn curvature(triple: &CompatibleTriple, conn: &ConnectionField, route: CurvatureRoute) -> Result<CurvatureData> {
    triple.grid().check_same(&conn.grid)?;
    let grid = *triple.grid();
    let n = grid.len();
    let sp = triple.spectral();
    let pairs = pair_indices();
    let mut raw = None;
    let rho_vals: Vec<[f64; 6]> = match route {
        CurvatureRoute::Trace => {
            let theta: Vec<Vec<f64>> = (0..4)
                .map(|b| (0..n).map(|i| (triple.j(i) * conn.hermitian[i][b]).trace()).collect())
                .collect();
            let refs: Vec<&[f64]> = theta.iter().map(Vec::as_slice).collect();
            let dtheta = sp.gradients(&refs);
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let h = &conn.hermitian[i];
                    let j = triple.j(i);
                    let dj = &conn.dj[i];
                    std::array::from_fn(|k| {
                        let (a, b) = pairs[k];
                        let comm = h[a] * h[b] - h[b] * h[a];
                        0.5 * (dtheta[b][a][i] - dtheta[a][b][i] - (dj[a] * h[b]).trace()
                            + (dj[b] * h[a]).trace()
                            + (j * comm).trace())
                    })
                })
                .collect()
        }
        CurvatureRoute::Full => {
            let per_dir: Vec<Vec<Matrix4<f64>>> =
                (0..4).map(|a| conn.hermitian.iter().map(|f| f[a]).collect()).collect();
            let refs: Vec<&[Matrix4<f64>]> = per_dir.iter().map(Vec::as_slice).collect();
            let dh = matrix_gradients(sp, &refs);
            let r: Vec<[Matrix4<f64>; 6]> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let h = &conn.hermitian[i];
                    std::array::from_fn(|k| {
                        let (a, b) = pairs[k];
                        dh[b][i][a] - dh[a][i][b] + h[a] * h[b] - h[b] * h[a]
                    })
                })
                .collect();
            let vals = (0..n)
                .map(|i| std::array::from_fn(|k| 0.5 * (triple.j(i) * r[i][k]).trace()))
                .collect();
            raw = Some(r);
            vals
        }
    };
    let ricci_form = FormField::from_points(grid, 2, &rho_vals);
    let scalar = scalar_from_ricci(triple, &ricci_form)?;
    Ok(CurvatureData { ricci_form, scalar, raw })
}

/// Connection and curvature in one call (trace route).
pub fn hermitian_curvature(triple: &CompatibleTriple) -> Result<CurvatureData> {
    let conn = hermitian_connection(triple)?;
    curvature(triple, &conn, CurvatureRoute::Trace)
}

/// `s ω²/2 = 2 ρ ∧ ω`, i.e. `s ω² = 4 ρ∧ω`.
pub fn scalar_from_ricci(triple: &CompatibleTriple, rho: &FormField) -> Result<ScalarField> {
    let rw = wedge(rho, triple.omega())?;
    let vol = triple.volume_density();
    Ok(ScalarField { grid: rho.grid, values: rw.comps[0].iter().zip(vol).map(|(a, v)| 2.0 * a / v).collect() })
}

/// `2 g(ρ, ω)`, the trace form of the scalar curvature.
pub fn scalar_from_trace(triple: &CompatibleTriple, rho: &FormField) -> Result<ScalarField> {
    Ok(triple.pointwise_inner(rho, triple.omega())?.scaled(2.0))
}

/// Standard deviation of a function against the volume form.
pub fn weighted_stddev(triple: &CompatibleTriple, f: &[f64]) -> f64 {
    let m = triple.mean(f);
    let sq: Vec<f64> = f.iter().map(|v| (v - m) * (v - m)).collect();
    triple.mean(&sq).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeakReport {
    /// `‖ρ − (s/4)ω‖ / ‖ω‖` in L².
    pub einstein_defect: f64,
    pub scalar_mean: f64,
    pub scalar_stddev: f64,
    pub heak: bool,
}

/// HEAK test: `ρ = (s/4) ω` with constant s.
pub fn heak_report(triple: &CompatibleTriple, data: &CurvatureData) -> Result<HeakReport> {
    let dev = data.ricci_form.sub(&triple.omega().mul_scalar_field(&data.scalar.scaled(0.25).values));
    let einstein_defect = triple.l2_norm(&dev) / triple.l2_norm(triple.omega());
    let scalar_mean = triple.mean(&data.scalar.values);
    let scalar_stddev = weighted_stddev(triple, &data.scalar.values);
    let heak =
        einstein_defect <= tolerances::HEAK && scalar_stddev <= tolerances::HEAK * (1.0 + scalar_mean.abs());
    Ok(HeakReport { einstein_defect, scalar_mean, scalar_stddev, heak })
}

/// Closedness of ρ relative to `‖ρ‖_∞ · k_max` (zero when ρ vanishes).
pub fn ricci_closedness(triple: &CompatibleTriple, data: &CurvatureData) -> Result<f64> {
    let d = exterior_d(triple.spectral(), &data.ricci_form)?;
    let s = data.ricci_form.sup_norm() * triple.spectral().max_wavenumber();
    Ok(if s == 0.0 { d.sup_norm() } else { d.sup_norm() / s })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConformalConfig {
    pub max_iterations: usize,
    /// Target for `max |ω̃²/ω² − e^{F−c}|`.
    pub volume_tolerance: f64,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self { max_iterations: 60, volume_tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    /// `‖ρ̃ − ρ + ½ dJdF‖ / ‖ρ‖`, or absolute when ρ = 0.
    pub residual: f64,
    pub relative: bool,
    /// Closedness of ω̃ (spectral, relative).
    pub closedness: f64,
    /// Final `max |ω̃²/ω² − e^{F−c}|`.
    pub volume_error: f64,
    /// Normalizing constant `c = log mean e^F`.
    pub shift: f64,
    pub iterations: usize,
}

/// Check `ρ̃ = ρ − ½ dJdF` for the cohomologous J-invariant ω̃ with `ω̃² = e^{F−c} ω²`.
///
/// ω̃ is sought as `ω + d𝔾d^c h` and `h` is updated by the volume mismatch,
/// since to first order the volume ratio of that deformation is `1 − h`.
pub fn conformal_shift_check(cache: &SpectralCache, f: &ScalarField, cfg: &ConformalConfig) -> Result<ConformalReport> {
    let triple = cache.triple();
    let grid = *triple.grid();
    let vol = triple.volume_density();
    let ef: Vec<f64> = f.values.iter().map(|v| v.exp()).collect();
    let shift = triple.mean(&ef).ln();
    let target: Vec<f64> = f.values.iter().map(|v| (v - shift).exp()).collect();
    let mut h = ScalarField::zeros(grid);
    let mut omega_t = triple.omega().clone();
    let mut volume_error = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        let ratio: Vec<f64> = (0..grid.len()).map(|i| pfaffian(&omega_t.at(i)) / vol[i]).collect();
        let mismatch: Vec<f64> = ratio.iter().zip(&target).map(|(r, t)| r - t).collect();
        volume_error = mismatch.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if volume_error <= cfg.volume_tolerance {
            break;
        }
        h = h.add(&ScalarField { grid, values: mismatch });
        h = triple.zero_mean(&h);
        omega_t = triple.omega().add(&crate::ddc::dgdc(cache, &h)?);
        iterations += 1;
    }
    let tilde = triple.with_omega(omega_t)?;
    let rho = hermitian_curvature(triple)?;
    let rho_t = hermitian_curvature(&tilde)?;
    let jdf = dc_scalar(triple, f)?;
    let correction = exterior_d(triple.spectral(), &jdf)?;
    let diff = rho_t.ricci_form.sub(&rho.ricci_form).lin(1.0, &correction, 0.5);
    let rho_norm = triple.l2_norm(&rho.ricci_form);
    let relative = rho_norm > 1e-12;
    let d = triple.l2_norm(&diff);
    Ok(ConformalReport {
        residual: if relative { d / rho_norm } else { d },
        relative,
        closedness: tilde.closedness_residual(),
        volume_error,
        shift,
        iterations,
    })
}
