use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use akgeom::calculus::SpectralCache;
use akgeom::curvature::{
    curvature, heak_report, hermitian_connection, ricci_closedness, scalar_from_trace, weighted_stddev, CurvatureRoute,
};
use akgeom::ddc::{
    corollary2_decompose, dgdc, invariant_admissible, lemma1_potential, lie_derivative_j, prop2_potential,
    prop3_identity, weinkove_identity,
};
use akgeom::deform::{Deformation, DeformationState};
use akgeom::families::{find_path, modulated_path, JPath};
use akgeom::forms::FormField;
use akgeom::grid::GridSpec;
use akgeom::identities::commutator_suite;
use akgeom::io::{write_triple, Array, Container};
use akgeom::kt::kt_certificate;
use akgeom::random::FieldSampler;
use akgeom::structure::CompatibleTriple;
use akgeom::{tolerances, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig, Suite};
use crate::report::{Check, Outcome};

/// Result of one command before it is wrapped into a report.
#[derive(Default)]
pub struct Output {
    pub checks: Vec<Check>,
    pub data: Value,
    pub text: String,
    pub error: Option<(Outcome, String)>,
}

pub fn classify(e: &Error) -> Outcome {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Format(_) | Error::InvalidGrid(_) => Outcome::ConfigError,
        Error::Convergence { .. } | Error::NewtonDivergence { .. } | Error::DegenerateForm { .. } | Error::Invariance { .. } => {
            Outcome::Divergence
        }
        _ => Outcome::ToleranceFailure,
    }
}

fn failed(e: Error) -> Output {
    Output { error: Some((classify(&e), e.to_string())), data: Value::Null, ..Default::default() }
}

pub fn run(cfg: &RunConfig, dir: &Path) -> Output {
    let command = cfg.command.expect("command resolved");
    let r = match command {
        Command::VerifyIdentities => verify_identities(cfg),
        Command::DdcVerify => ddc_verify(cfg),
        Command::Curvature => curvature_cmd(cfg),
        Command::Deform => return deform(cfg, dir),
        Command::KtCheck => kt_check(),
        Command::BuildTriple => build_triple(cfg, dir),
    };
    r.unwrap_or_else(failed)
}

fn grid(cfg: &RunConfig) -> akgeom::Result<GridSpec> {
    GridSpec::new(cfg.resolution(), cfg.grid.period)
}

pub fn path(cfg: &RunConfig) -> akgeom::Result<JPath> {
    if cfg.structure.path == "torus-modulated" {
        Ok(modulated_path(cfg.structure.kappa))
    } else {
        find_path(&cfg.structure.path)
    }
}

/// The triple named by the structure section: a container file or a built-in path at `t`.
pub fn triple(cfg: &RunConfig) -> akgeom::Result<CompatibleTriple> {
    if let Some(file) = &cfg.structure.file {
        return akgeom::io::read_triple(file);
    }
    let g = grid(cfg)?;
    let p = path(cfg)?;
    let omega = FormField::constant(g, 2, &p.omega_choice().components());
    CompatibleTriple::new(omega, p.at(cfg.structure.t, &g)?)
}

/// Probe band: `n/4` modes on each axis, none on axes of four points or fewer.
fn probe_cutoff(g: &GridSpec) -> [usize; 4] {
    std::array::from_fn(|a| if g.resolution[a] <= 4 { 0 } else { (g.resolution[a] / 4).max(1) })
}

fn verify_identities(cfg: &RunConfig) -> akgeom::Result<Output> {
    let cache = SpectralCache::new(triple(cfg)?, cfg.green)?;
    let res = commutator_suite(&cache, cfg.identities.fields, cfg.seed)?;
    let checks = res.iter().map(|r| Check::at_most(&r.name, r.max_residual, cfg.tolerances.commutator)).collect();
    Ok(Output { checks, data: json!({ "identities": res }), ..Default::default() })
}

fn rel(c: &CompatibleTriple, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nb = c.l2_inner_scalar(b, b).sqrt();
    c.l2_inner_scalar(&d, &d).sqrt() / nb.max(f64::MIN_POSITIVE)
}

fn ddc_verify(cfg: &RunConfig) -> akgeom::Result<Output> {
    let cache = SpectralCache::new(triple(cfg)?, cfg.green)?;
    let g = *cache.grid();
    let tol = &cfg.tolerances;
    let n = cfg.ddc.samples;
    let mut sampler = FieldSampler::with_cutoff(cache.spectral(), cfg.seed, probe_cutoff(&g));
    let mut out = Output::default();
    let mut data = serde_json::Map::new();
    for suite in cfg.ddc.suite.expand() {
        let name = suite.name();
        match suite {
            Suite::Lemma1 => {
                let (mut res, mut eq) = (Vec::new(), Vec::new());
                for _ in 0..n {
                    let f = invariant_admissible(&cache, &sampler.scalar_zero_mean())?;
                    let psi = dgdc(&cache, &f)?;
                    let r = lemma1_potential(&cache, &psi)?;
                    res.push(r.residual);
                    eq.push(r.equality_residual);
                }
                out.checks.push(Check::at_most("lemma1 reconstruction", max(&res), tol.lemma1));
                out.checks.push(Check::at_most("lemma1 equality dGd^c = Gdd^c", max(&eq), tol.lemma1));
                data.insert(name.into(), json!({ "reconstruction": res, "equality": eq }));
            }
            Suite::Prop2 => {
                let (mut err, mut res, mut gap) = (Vec::new(), Vec::new(), Vec::new());
                for _ in 0..n {
                    let planted = cache.zero_mean(&invariant_admissible(&cache, &sampler.scalar_zero_mean())?);
                    let psi2 = cache.omega().clone();
                    let psi1 = psi2.add(&dgdc(&cache, &planted)?);
                    let r = prop2_potential(&cache, &psi1, &psi2)?;
                    err.push(rel(&cache, &cache.zero_mean(&r.potential).values, &planted.values));
                    res.push(r.residual);
                    gap.push(r.uniqueness_gap);
                }
                out.checks.push(Check::at_most("prop2 planted potential recovery", max(&err), tol.prop2));
                out.checks.push(Check::at_most("prop2 uniqueness gap", max(&gap), tol.prop2));
                data.insert(name.into(), json!({ "recovery_error": err, "residual": res, "uniqueness_gap": gap }));
            }
            Suite::Prop3 => {
                let (mut res, mut ratio) = (Vec::new(), Vec::new());
                for _ in 0..n {
                    let r = prop3_identity(&cache, &sampler.scalar_zero_mean())?;
                    res.push(r.residual);
                    ratio.push(r.anti_invariant_ratio);
                }
                out.checks.push(Check::at_most("prop3 identity", max(&res), tol.prop3));
                data.insert(name.into(), json!({ "residual": res, "anti_invariant_ratio": ratio }));
            }
            Suite::Cor2 => {
                let axes = holomorphic_axes(&cache);
                if axes.is_empty() {
                    return Err(Error::NotHolomorphic { residual: f64::NAN });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let (mut res, mut cos) = (Vec::new(), Vec::new());
                for _ in 0..n {
                    let x: [Vec<f64>; 4] = std::array::from_fn(|a| {
                        let c = if axes.contains(&a) { rng.gen_range(-1.0..1.0) } else { 0.0 };
                        vec![c; g.len()]
                    });
                    let r = corollary2_decompose(&cache, &x)?;
                    res.push(r.residual);
                    cos.push(r.cosines.iter().fold(0.0f64, |m, c| m.max(c.abs())));
                }
                out.checks.push(Check::at_most("cor2 decomposition", max(&res), tol.cor2));
                data.insert(
                    name.into(),
                    json!({ "holomorphic_axes": axes, "residual": res, "max_abs_cosine": cos }),
                );
            }
            Suite::Weinkove => {
                let (mut res, mut corr) = (Vec::new(), Vec::new());
                for _ in 0..n {
                    let r = weinkove_identity(&cache, &sampler.scalar_zero_mean())?;
                    res.push(r.residual);
                    corr.push(r.correction_ratio);
                }
                out.checks.push(Check::at_most("weinkove identity", max(&res), tol.weinkove));
                data.insert(name.into(), json!({ "residual": res, "correction_ratio": corr }));
            }
            Suite::All => unreachable!(),
        }
    }
    out.data = Value::Object(data);
    Ok(out)
}

fn max(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(*x) })
}

/// Coordinate axes whose constant vector fields preserve J.
fn holomorphic_axes(cache: &SpectralCache) -> Vec<usize> {
    let n = cache.grid().len();
    (0..4)
        .filter(|&a| {
            let x: [Vec<f64>; 4] = std::array::from_fn(|b| vec![if a == b { 1.0 } else { 0.0 }; n]);
            lie_derivative_j(cache, &x).iter().all(|l| l.amax() <= tolerances::HOLOMORPHY)
        })
        .collect()
}

fn curvature_cmd(cfg: &RunConfig) -> akgeom::Result<Output> {
    let triple = triple(cfg)?;
    let conn = hermitian_connection(&triple)?;
    let trace = curvature(&triple, &conn, CurvatureRoute::Trace)?;
    let full = curvature(&triple, &conn, CurvatureRoute::Full)?;
    let scale = triple.l2_norm(&trace.ricci_form).max(1.0);
    let route_gap = triple.l2_norm(&trace.ricci_form.sub(&full.ricci_form)) / scale;
    let s_trace = scalar_from_trace(&triple, &trace.ricci_form)?;
    let s_scale = triple.l2_inner_scalar(&trace.scalar.values, &trace.scalar.values).sqrt().max(1.0);
    let ds: Vec<f64> = trace.scalar.values.iter().zip(&s_trace.values).map(|(a, b)| a - b).collect();
    let scalar_gap = triple.l2_inner_scalar(&ds, &ds).sqrt() / s_scale;
    let closed = ricci_closedness(&triple, &trace)?;
    let heak = heak_report(&triple, &trace)?;
    let tol = &cfg.tolerances;
    let checks = vec![
        Check::at_most("ricci form: trace vs full curvature route", route_gap, tol.curvature_routes),
        Check::at_most("scalar curvature: wedge vs trace route", scalar_gap, tol.curvature_routes),
        Check::at_most("ricci form closedness", closed, tol.ricci_closedness),
    ];
    let (smin, smax) = trace.scalar.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let data = json!({
        "grid": triple.grid(),
        "heak": heak,
        "scalar": { "mean": triple.mean(&trace.scalar.values), "stddev": weighted_stddev(&triple, &trace.scalar.values), "min": smin, "max": smax },
        "ricci_l2": triple.l2_norm(&trace.ricci_form),
        "torsion_sup": conn.torsion_norm(),
        "dj_sup": conn.dj_norm(&triple),
    });
    Ok(Output { checks, data, ..Default::default() })
}

const CSV_HEADER: &str = "t,step,newton_iterations,linear_iterations,phi_norm,scalar_mean,scalar_stddev,mean_drift,anti_invariant_residual,f_norm,cohomology_drift,min_volume_ratio";

fn csv_row(s: &DeformationState) -> String {
    let d = &s.diagnostics;
    format!(
        "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
        d.t,
        d.step,
        d.newton_iterations,
        d.linear_iterations,
        d.phi_norm,
        d.scalar_mean,
        d.scalar_stddev,
        d.mean_drift,
        d.anti_invariant_residual,
        d.f_norm,
        d.cohomology_drift,
        d.min_volume_ratio
    )
}

fn io_err(e: std::io::Error) -> Output {
    failed(e.into())
}

fn deform(cfg: &RunConfig, dir: &Path) -> Output {
    let setup = grid(cfg).and_then(|g| Ok((g, path(cfg)?)));
    let (g, p) = match setup {
        Ok(x) => x,
        Err(e) => return failed(e),
    };
    let trivial = p.name == "torus-constant";
    let def = match Deformation::new(p, g, cfg.deform.continuation(cfg.green)) {
        Ok(d) => d,
        Err(e) => return failed(e),
    };
    let outcome = def.continuation(cfg.deform.t_max);
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let steps_dir = dir.join("steps");
    if let Err(e) = fs::create_dir_all(&steps_dir) {
        return io_err(e);
    }
    for (k, s) in outcome.states.iter().enumerate() {
        let d = &s.diagnostics;
        csv.push_str(&csv_row(s));
        csv.push('\n');
        checks.push(Check::at_most(format!("t={:.4} ‖Φ‖", d.t), d.phi_norm, cfg.deform.newton_tolerance));
        checks.push(Check::at_most(format!("t={:.4} stddev(s)", d.t), d.scalar_stddev, tol.scalar_stddev));
        if trivial {
            checks.push(Check::at_most(format!("t={:.4} ‖f‖ on constant path", d.t), d.f_norm, tol.trivial_potential));
        }
        let step = json!({ "index": k, "diagnostics": d, "newton_residual_history": s.newton_residual_history, "converged": s.converged });
        let body = serde_json::to_string_pretty(&step).unwrap() + "\n";
        if let Err(e) = fs::write(steps_dir.join(format!("step_{k:04}.json")), body) {
            return io_err(e);
        }
        if cfg.deform.save_fields {
            let c = Container::new(g)
                .push(Array::scalar("f", &s.f))
                .push(Array::form("omega", &s.omega_tf))
                .push(Array::scalar("scalar_curvature", &s.scalar_curvature));
            if let Err(e) = c.write(&steps_dir.join(format!("step_{k:04}.akg"))) {
                return failed(e);
            }
        }
    }
    if let Err(e) = fs::write(dir.join("steps.csv"), &csv) {
        return io_err(e);
    }
    let reached = outcome.states.last().map_or(0.0, |s| s.t);
    let error = outcome.failure.as_ref().map(|f| {
        (classify(&f.error), format!("step to t = {} (h = {}) failed: {}", f.t, f.step, f.error))
    });
    let data = json!({
        "path": def.path().name,
        "grid": g,
        "t_reached": reached,
        "steps": outcome.states.len(),
        "csv": "steps.csv",
        "diagnostics": outcome.states.iter().map(|s| &s.diagnostics).collect::<Vec<_>>(),
    });
    Output { checks, data, text: String::new(), error }
}

fn kt_check() -> akgeom::Result<Output> {
    let cert = kt_certificate()?;
    let c = &cert.counts;
    let checks = vec![
        Check::holds("d² = 0 on the invariant algebra", cert.d_squared_zero),
        Check::holds("ω closed", cert.omega_closed),
        Check::holds("ρ^∇ = 0", cert.ricci_form == "0"),
        Check::holds("b⁺ = 2", c.b_plus == 2),
        Check::holds("h⁻_J = b⁺ − 1 = 1", c.h_minus == 1 && c.b_plus == 2),
        Check::holds("D^gJ ≠ 0 (non-Kähler)", cert.correction_nonzero),
        Check::holds("certificate", cert.passed),
    ];
    let text = cert.to_string();
    Ok(Output { checks, data: serde_json::to_value(&cert).unwrap(), text, error: None })
}

fn build_triple(cfg: &RunConfig, dir: &Path) -> akgeom::Result<Output> {
    let t = triple(cfg)?;
    fs::create_dir_all(dir)?;
    let file = dir.join("triple.akg");
    write_triple(&file, &t)?;
    let mut text = String::new();
    let _ = write!(text, "wrote {}", file.display());
    let data = json!({
        "file": "triple.akg",
        "grid": t.grid(),
        "closedness": t.closedness_residual(),
        "volume": t.total_volume(),
    });
    Ok(Output { checks: Vec::new(), data, text, error: None })
}
