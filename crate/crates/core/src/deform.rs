//! The scalar-curvature map `Φ(t, f)` along a path `J_t`, its linearization,
//! Newton solves and continuation in t.

use serde::{Deserialize, Serialize};

use crate::calculus::{laplacian, GreenSolveConfig, LaplacianKind, SpectralCache};
use crate::curvature::{hermitian_curvature, weighted_stddev, CurvatureData};
use crate::ddc::dgdc;
use crate::error::{Error, Result};
use crate::families::JPath;
use crate::forms::{FormField, ScalarField};
use crate::grid::GridSpec;
use crate::krylov::{self, KrylovStats};
use crate::random::FieldSampler;
use crate::structure::{pfaffian, CompatibleTriple};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    Previous,
    LinearExtrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationConfig {
    pub step: f64,
    pub newton_tolerance: f64,
    pub max_newton_iterations: usize,
    /// Relative tolerance of each GMRES solve (inexact-Newton forcing term).
    pub linear_tolerance: f64,
    pub max_linear_iterations: usize,
    pub gmres_restart: usize,
    pub min_step: f64,
    pub green: GreenSolveConfig,
    pub predictor: Predictor,
    /// Seed of the probe function used for the per-step invariance diagnostic.
    pub probe_seed: u64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            newton_tolerance: 1e-9,
            max_newton_iterations: 30,
            linear_tolerance: 1e-3,
            max_linear_iterations: 200,
            gmres_restart: 40,
            min_step: 1e-4,
            green: GreenSolveConfig::default(),
            predictor: Predictor::LinearExtrapolation,
            probe_seed: 7,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")))
            }
        };
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step = {} must be positive", self.step)));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.step) {
            return Err(Error::Config(format!("min_step = {} must lie in (0, step]", self.min_step)));
        }
        unit("newton_tolerance", self.newton_tolerance)?;
        unit("linear_tolerance", self.linear_tolerance)?;
        if self.max_newton_iterations == 0 || self.max_linear_iterations == 0 || self.gmres_restart == 0 {
            return Err(Error::Config("iteration limits must be at least 1".into()));
        }
        self.green.validate()
    }
}

/// A converged (or attempted) point of the continuation.
#[derive(Debug, Clone)]
pub struct DeformationState {
    pub t: f64,
    pub f: ScalarField,
    pub omega_tf: FormField,
    pub scalar_curvature: ScalarField,
    pub newton_residual_history: Vec<f64>,
    pub converged: bool,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub step: f64,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub phi_norm: f64,
    /// Standard deviation of s^∇ from a fresh curvature computation.
    pub scalar_stddev: f64,
    pub scalar_mean: f64,
    /// Spread of the volume mean of s^∇ over the Newton iterates.
    pub mean_drift: f64,
    /// Anti-invariant ratio of `d𝔾_t d^c_t` applied to a fixed probe.
    pub anti_invariant_residual: f64,
    pub f_norm: f64,
    /// Norm of the harmonic part of `ω_{t,f} − ω`.
    pub cohomology_drift: f64,
    pub min_volume_ratio: f64,
}

/// The deformation problem for a path, with the base point cached.
pub struct Deformation {
    path: JPath,
    base: SpectralCache,
    cfg: ContinuationConfig,
    base_shift: f64,
    flat_base: bool,
}

/// `(ω, J_t)` with its Green operators.
pub struct Slice {
    pub t: f64,
    pub cache: SpectralCache,
}

/// Everything computed at one `(t, f)`.
pub struct PhiEval {
    pub phi: ScalarField,
    pub psi: FormField,
    pub triple: CompatibleTriple,
    pub curvature: CurvatureData,
    pub scalar_mean: f64,
}

impl Deformation {
    /// Set up at t = 0; the base must be HEAK with `s^∇ ≤ 0`.
    pub fn new(path: JPath, grid: GridSpec, cfg: ContinuationConfig) -> Result<Self> {
        cfg.validate()?;
        let omega = FormField::constant(grid, 2, &path.omega_choice().components());
        let triple = CompatibleTriple::new(omega, path.at(0.0, &grid)?)?;
        let curv = hermitian_curvature(&triple)?;
        let report = crate::curvature::heak_report(&triple, &curv)?;
        if !report.heak {
            return Err(Error::Config(format!(
                "path '{}' is not HEAK at t = 0 (Einstein defect {:.3e}, stddev {:.3e})",
                path.name, report.einstein_defect, report.scalar_stddev
            )));
        }
        if report.scalar_mean > tolerances::HEAK {
            return Err(Error::Config(format!(
                "path '{}' has positive Hermitian scalar curvature {:.3e} at t = 0",
                path.name, report.scalar_mean
            )));
        }
        let flat_base = (0..grid.len()).all(|i| (triple.g(i) - triple.g(0)).amax() == 0.0);
        let base = SpectralCache::new(triple, cfg.green)?;
        Ok(Self { path, base, cfg, base_shift: 0.5 * report.scalar_mean, flat_base })
    }

    pub fn path(&self) -> &JPath {
        &self.path
    }

    pub fn base(&self) -> &SpectralCache {
        &self.base
    }

    pub fn config(&self) -> &ContinuationConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridSpec {
        self.base.grid()
    }

    pub fn slice(&self, t: f64) -> Result<Slice> {
        let j = self.path.at(t, self.grid())?;
        let triple = self.base.triple().with_j(j)?;
        Ok(Slice { t, cache: SpectralCache::new(triple, self.cfg.green)? })
    }

    /// Zero mean against the reference volume ω²/2.
    pub fn zero_mean(&self, f: &ScalarField) -> ScalarField {
        self.base.zero_mean(f)
    }

    /// `ω_{t,f} = ω + d𝔾_t d^c_t f`, checked for invariance and nondegeneracy.
    pub fn deformed_triple(&self, slice: &Slice, f: &ScalarField) -> Result<(FormField, CompatibleTriple)> {
        let psi = dgdc(&slice.cache, f)?;
        let scale = slice.cache.l2_norm(&psi);
        if scale > 0.0 {
            let ratio = slice.cache.l2_norm(&slice.cache.anti_invariant_part(&psi)?) / scale;
            if ratio > tolerances::INVARIANCE {
                return Err(Error::Invariance { ratio });
            }
        }
        let omega_tf = slice.cache.omega().add(&psi);
        let min_density = (0..omega_tf.n_points()).map(|i| pfaffian(&omega_tf.at(i))).fold(f64::INFINITY, f64::min);
        if min_density <= 0.0 {
            return Err(Error::DegenerateForm { min_density });
        }
        let triple = slice.cache.with_omega(omega_tf).map_err(|e| match e {
            Error::Compatibility { .. } => Error::DegenerateForm { min_density },
            other => other,
        })?;
        Ok((psi, triple))
    }

    /// `Φ(t, f) = s^∇ − mean s^∇` for `(ω_{t,f}, J_t)`.
    pub fn phi(&self, slice: &Slice, f: &ScalarField) -> Result<PhiEval> {
        let (psi, triple) = self.deformed_triple(slice, f)?;
        let curvature = hermitian_curvature(&triple)?;
        let scalar_mean = triple.mean(&curvature.scalar.values);
        let phi = curvature.scalar.shift(-scalar_mean);
        Ok(PhiEval { phi, psi, triple, curvature, scalar_mean })
    }

    /// `−Δ^g ḟ − 2g(ρ^∇, d𝔾d^c ḟ)` at an evaluated point, projected to zero mean.
    pub fn linearized(&self, at: &PhiEval, cache: &SpectralCache, fdot: &ScalarField) -> Result<ScalarField> {
        linearized_scalar_curvature(cache, &at.curvature, fdot).map(|s| at.triple.zero_mean(&s))
    }

    /// Inverse of the frozen model operator `−Δ^{g₀} + s₀/2` on zero-mean functions.
    fn model_inverse(&self, r: &ScalarField) -> Result<ScalarField> {
        let r = self.base.zero_mean(r);
        if self.flat_base {
            let sp = self.base.spectral();
            let ginv = *self.base.ginv(0);
            let c = self.base_shift;
            let out = sp.apply_symbol(&[&r.values], |i, k| {
                let lap: f64 = (0..4).map(|a| (0..4).map(|b| ginv[(a, b)] * k[a] * k[b]).sum::<f64>()).sum();
                let sym = -lap + c;
                if sp.is_corner_mode(i) || sym == 0.0 {
                    0.0
                } else {
                    1.0 / sym
                }
            });
            Ok(ScalarField { grid: r.grid, values: out.into_iter().next().unwrap() })
        } else {
            // The constant shift is left out here; GMRES absorbs it.
            Ok(self.base.green_scalar(&r, LaplacianKind::Metric)?.scaled(-1.0))
        }
    }

    /// Newton iteration `f ← f − L⁻¹Φ(t, f)` from `f_init`.
    pub fn newton(&self, slice: &Slice, f_init: &ScalarField) -> Result<DeformationState> {
        let cfg = &self.cfg;
        let mut f = self.zero_mean(f_init);
        let mut history = Vec::new();
        let mut means = Vec::new();
        let mut increases = 0;
        let mut linear_iterations = 0;
        let mut iterations = 0;
        loop {
            let eval = self.phi(slice, &f)?;
            let norm = eval.triple.l2_inner_scalar(&eval.phi.values, &eval.phi.values).sqrt();
            if let Some(&last) = history.last() {
                if norm > last {
                    increases += 1;
                } else {
                    increases = 0;
                }
            }
            history.push(norm);
            means.push(eval.scalar_mean);
            if norm <= cfg.newton_tolerance {
                return self.finish(slice, f, eval, history, means, iterations, linear_iterations);
            }
            if increases >= 3 || iterations >= cfg.max_newton_iterations || !norm.is_finite() {
                return Err(Error::NewtonDivergence { t: slice.t, history });
            }
            let cache_tf = SpectralCache::new(eval.triple.clone(), cfg.green)?;
            let (step, stats) = self.solve_linear(&eval, &cache_tf, &eval.phi)?;
            linear_iterations += stats.iterations;
            f = self.zero_mean(&f.sub(&step));
            iterations += 1;
        }
    }

    /// GMRES for `L x = r` with right preconditioning by the model operator.
    fn solve_linear(&self, eval: &PhiEval, cache: &SpectralCache, r: &ScalarField) -> Result<(ScalarField, KrylovStats)> {
        let grid = *self.grid();
        let wrap = |v: &[f64]| ScalarField { grid, values: v.to_vec() };
        let failure = std::cell::RefCell::new(None);
        let apply = |y: &[f64]| -> Vec<f64> {
            let run = || -> Result<Vec<f64>> {
                let x = self.model_inverse(&wrap(y))?;
                Ok(self.linearized(eval, cache, &x)?.values)
            };
            run().unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                vec![0.0; y.len()]
            })
        };
        let b = eval.triple.zero_mean(r);
        let result = krylov::gmres(
            apply,
            &b.values,
            None,
            self.cfg.linear_tolerance,
            self.cfg.max_linear_iterations,
            self.cfg.gmres_restart,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let (y, stats) = result?;
        Ok((self.model_inverse(&wrap(&y))?, stats))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        slice: &Slice,
        f: ScalarField,
        eval: PhiEval,
        history: Vec<f64>,
        means: Vec<f64>,
        iterations: usize,
        linear_iterations: usize,
    ) -> Result<DeformationState> {
        let omega_tf = eval.triple.omega().clone();
        let fresh = hermitian_curvature(&eval.triple)?;
        let scalar_stddev = weighted_stddev(&eval.triple, &fresh.scalar.values);
        let scalar_mean = eval.triple.mean(&fresh.scalar.values);
        let mean_drift = means.iter().fold(0.0f64, |m, v| m.max((v - means[0]).abs()));
        let anti_invariant_residual = self.invariance_probe(slice)?;
        let f_norm = self.base.l2_inner_scalar(&f.values, &f.values).sqrt();
        let exact = omega_tf.sub(self.base.omega());
        let cohomology_drift = self.base.l2_norm(&slice.cache.harmonic_project(&exact, LaplacianKind::Metric)?);
        let base_vol = self.base.volume_density();
        let min_volume_ratio =
            eval.triple.volume_density().iter().zip(base_vol).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min);
        let diagnostics = StepDiagnostics {
            t: slice.t,
            step: 0.0,
            newton_iterations: iterations,
            linear_iterations,
            phi_norm: *history.last().unwrap(),
            scalar_stddev,
            scalar_mean,
            mean_drift,
            anti_invariant_residual,
            f_norm,
            cohomology_drift,
            min_volume_ratio,
        };
        Ok(DeformationState {
            t: slice.t,
            f,
            omega_tf,
            scalar_curvature: fresh.scalar,
            newton_residual_history: history,
            converged: true,
            diagnostics,
        })
    }

    /// Anti-invariant ratio of `d𝔾_t d^c_t` on a fixed smooth probe.
    pub fn invariance_probe(&self, slice: &Slice) -> Result<f64> {
        let probe = FieldSampler::new(self.base.spectral(), self.cfg.probe_seed).scalar_zero_mean();
        let psi = dgdc(&slice.cache, &probe)?;
        slice.cache.anti_invariant_ratio(&psi)
    }

    /// March `t = 0, h, 2h, …, t_max`, halving h on failure down to `min_step` and
    /// doubling it back towards `step` after two consecutive successes.
    pub fn continuation(&self, t_max: f64) -> ContinuationOutcome {
        let mut states: Vec<DeformationState> = Vec::new();
        let zero = ScalarField::zeros(*self.grid());
        let first = self.slice(0.0).and_then(|s| self.newton(&s, &zero));
        match first {
            Ok(mut s) => {
                s.diagnostics.step = 0.0;
                states.push(s);
            }
            Err(e) => return ContinuationOutcome { states, failure: Some(StepFailure { t: 0.0, step: 0.0, error: e }) },
        }
        let mut h = self.cfg.step;
        let mut streak = 0;
        let eps = 1e-12 * t_max.abs().max(1.0);
        while states.last().unwrap().t < t_max - eps {
            let last = states.last().unwrap();
            let t = (last.t + h).min(t_max);
            let t = if (t_max - t).abs() <= eps { t_max } else { t };
            let guess = match (self.cfg.predictor, states.len()) {
                (Predictor::LinearExtrapolation, n) if n >= 2 => {
                    let prev = &states[n - 2];
                    let r = (t - last.t) / (last.t - prev.t);
                    last.f.add(&last.f.sub(&prev.f).scaled(r))
                }
                _ => last.f.clone(),
            };
            let step = t - last.t;
            match self.slice(t).and_then(|s| self.newton(&s, &guess)) {
                Ok(mut s) => {
                    s.diagnostics.step = step;
                    states.push(s);
                    streak += 1;
                    if streak >= 2 && h < self.cfg.step {
                        h = (2.0 * h).min(self.cfg.step);
                        streak = 0;
                    }
                }
                Err(e) => {
                    streak = 0;
                    let retry = matches!(e, Error::NewtonDivergence { .. } | Error::DegenerateForm { .. } | Error::Convergence { .. });
                    if retry && h / 2.0 >= self.cfg.min_step {
                        h /= 2.0;
                        continue;
                    }
                    return ContinuationOutcome { states, failure: Some(StepFailure { t, step, error: e }) };
                }
            }
        }
        ContinuationOutcome { states, failure: None }
    }
}

#[derive(Debug, Clone)]
pub struct StepFailure {
    pub t: f64,
    pub step: f64,
    pub error: Error,
}

#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    pub states: Vec<DeformationState>,
    pub failure: Option<StepFailure>,
}

/// `ṡ^∇ = −Δ^g ḟ − 2g(ρ^∇, d𝔾d^cḟ)` for the structure of `cache` with Ricci form from `curv`.
pub fn linearized_scalar_curvature(cache: &SpectralCache, curv: &CurvatureData, fdot: &ScalarField) -> Result<ScalarField> {
    let lap = laplacian(cache, &fdot.as_form(), LaplacianKind::Metric)?.to_scalar()?;
    let psi = dgdc(cache, fdot)?;
    let rho_psi = cache.pointwise_inner(&curv.ricci_form, &psi)?;
    Ok(lap.scaled(-1.0).sub(&rho_psi.scaled(2.0)))
}

/// Model operator `−Δ^g ḟ + (s/2)ḟ` at a HEAK point with constant curvature `s`.
pub fn model_operator(triple: &CompatibleTriple, s: f64, fdot: &ScalarField) -> Result<ScalarField> {
    let lap = laplacian(triple, &fdot.as_form(), LaplacianKind::Metric)?.to_scalar()?;
    Ok(lap.scaled(-1.0).add(&fdot.scaled(0.5 * s)))
}

/// Largest and smallest Ritz values of a symmetric operator on the span of `probes`,
/// orthonormalized in the volume inner product.
pub fn ritz_values(
    triple: &CompatibleTriple,
    probes: &[ScalarField],
    op: impl Fn(&ScalarField) -> Result<ScalarField>,
) -> Result<Vec<f64>> {
    let ip = |a: &ScalarField, b: &ScalarField| triple.l2_inner_scalar(&a.values, &b.values);
    let mut basis: Vec<ScalarField> = Vec::new();
    for p in probes {
        let mut v = triple.zero_mean(p);
        for _ in 0..2 {
            for b in &basis {
                v = v.sub(&b.scaled(ip(&v, b)));
            }
        }
        let n = ip(&v, &v).sqrt();
        if n > 1e-12 {
            basis.push(v.scaled(1.0 / n));
        }
    }
    let images: Vec<ScalarField> = basis.iter().map(&op).collect::<Result<_>>()?;
    let k = basis.len();
    let m = nalgebra::DMatrix::from_fn(k, k, |r, c| 0.5 * (ip(&basis[r], &images[c]) + ip(&basis[c], &images[r])));
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev)
}

/// `|⟨Lu, v⟩ − ⟨u, Lv⟩| / (‖Lu‖‖v‖ + ‖u‖‖Lv‖)`.
pub fn symmetry_defect(
    triple: &CompatibleTriple,
    u: &ScalarField,
    v: &ScalarField,
    op: impl Fn(&ScalarField) -> Result<ScalarField>,
) -> Result<f64> {
    let ip = |a: &ScalarField, b: &ScalarField| triple.l2_inner_scalar(&a.values, &b.values);
    let lu = op(u)?;
    let lv = op(v)?;
    let scale = ip(&lu, &lu).sqrt() * ip(v, v).sqrt() + ip(u, u).sqrt() * ip(&lv, &lv).sqrt();
    Ok(if scale == 0.0 { 0.0 } else { (ip(&lu, v) - ip(u, &lv)).abs() / scale })
}

/// Finite-difference check of the volume, Ricci and scalar variations along `ω + ε d𝔾d^c ḟ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub volume: VariationEntry,
    pub ricci: VariationEntry,
    pub scalar: VariationEntry,
    /// `‖δ^g J 𝔾 d^c ḟ + ḟ‖ / ‖ḟ‖`.
    pub codifferential_identity: f64,
    /// Anti-invariant ratio of `d𝔾d^c ḟ`.
    pub invariance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationEntry {
    /// Relative residual of the centered difference at the coarse and fine ε.
    pub coarse: f64,
    pub fine: f64,
    /// `log₂(coarse / fine)`, `None` when both are at round-off (below 1e−10).
    pub order: Option<f64>,
    /// Relative residual of the Richardson-extrapolated difference.
    pub extrapolated: f64,
}

pub const VARIATION_STEPS: [f64; 2] = [1e-2, 5e-3];

struct Sample {
    volume: Vec<f64>,
    ricci: FormField,
    scalar: Vec<f64>,
}

fn sample(cache: &SpectralCache, psi: &FormField, eps: f64) -> Result<Sample> {
    let omega = cache.omega().lin(1.0, psi, eps);
    let triple = cache.with_omega(omega)?;
    let curv = hermitian_curvature(&triple)?;
    Ok(Sample { volume: triple.volume_density().to_vec(), ricci: curv.ricci_form, scalar: curv.scalar.values })
}

pub fn variation_check(cache: &SpectralCache, fdot: &ScalarField) -> Result<VariationReport> {
    let grid = *cache.grid();
    let psi = dgdc(cache, fdot)?;
    let npsi = cache.l2_norm(&psi);
    let invariance = if npsi > 0.0 { cache.l2_norm(&cache.anti_invariant_part(&psi)?) / npsi } else { 0.0 };
    if invariance > tolerances::INVARIANCE {
        return Err(Error::NotInvariant { ratio: invariance });
    }
    let base = hermitian_curvature(cache)?;
    let vol = cache.volume_density();

    let vol_rhs: Vec<f64> = fdot.values.iter().zip(vol).map(|(f, v)| -f * v).collect();
    let ricci_rhs = cache.exterior_d(&crate::calculus::dc_scalar(cache, fdot)?)?.scaled(0.5);
    let scalar_rhs = linearized_scalar_curvature(cache, &base, fdot)?;

    let jgdc = cache.j_act(&cache.green(&crate::calculus::dc_scalar(cache, fdot)?, LaplacianKind::Metric)?)?;
    let ident = cache.codifferential(&jgdc)?.to_scalar()?.add(fdot);
    let nf = cache.l2_inner_scalar(&fdot.values, &fdot.values).sqrt();
    let ni = cache.l2_inner_scalar(&ident.values, &ident.values).sqrt();
    let codifferential_identity = if nf > 0.0 { ni / nf } else { ni };

    let diffs = VARIATION_STEPS
        .iter()
        .map(|&eps| {
            let p = sample(cache, &psi, eps)?;
            let m = sample(cache, &psi, -eps)?;
            let c = 0.5 / eps;
            Ok((
                p.volume.iter().zip(&m.volume).map(|(a, b)| (a - b) * c).collect::<Vec<f64>>(),
                p.ricci.sub(&m.ricci).scaled(c),
                p.scalar.iter().zip(&m.scalar).map(|(a, b)| (a - b) * c).collect::<Vec<f64>>(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let scalar_norm = |v: &[f64]| cache.l2_inner_scalar(v, v).sqrt();
    let rel = |d: f64, n: f64| if n > 0.0 { d / n } else { d };
    let entry = |coarse: f64, fine: f64, extrapolated: f64| {
        let floor = 1e-10;
        let order = if coarse > floor && fine > floor { Some((coarse / fine).log2()) } else { None };
        VariationEntry { coarse, fine, order, extrapolated }
    };
    let richardson = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(c, f)| (4.0 * f - c) / 3.0).collect() };
    let sres = |d: &[f64], rhs: &[f64]| {
        let diff: Vec<f64> = d.iter().zip(rhs).map(|(a, b)| a - b).collect();
        rel(scalar_norm(&diff), scalar_norm(rhs))
    };
    let fres = |d: &FormField, rhs: &FormField| rel(cache.l2_norm(&d.sub(rhs)), cache.l2_norm(rhs));

    let volume = entry(
        sres(&diffs[0].0, &vol_rhs),
        sres(&diffs[1].0, &vol_rhs),
        sres(&richardson(&diffs[0].0, &diffs[1].0), &vol_rhs),
    );
    let ricci_ex = FormField::from_flat(grid, 2, &richardson(&diffs[0].1.flatten(), &diffs[1].1.flatten()));
    let ricci = entry(fres(&diffs[0].1, &ricci_rhs), fres(&diffs[1].1, &ricci_rhs), fres(&ricci_ex, &ricci_rhs));
    let scalar = entry(
        sres(&diffs[0].2, &scalar_rhs.values),
        sres(&diffs[1].2, &scalar_rhs.values),
        sres(&richardson(&diffs[0].2, &diffs[1].2), &scalar_rhs.values),
    );
    Ok(VariationReport { volume, ricci, scalar, codifferential_identity, invariance })
}
