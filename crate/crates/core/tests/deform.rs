mod common;

use std::f64::consts::PI;

use akgeom::calculus::LaplacianKind;
use akgeom::curvature::hermitian_curvature;
use akgeom::ddc::dgdc;
use akgeom::deform::{
    model_operator, ritz_values, symmetry_defect, variation_check, ContinuationConfig, Deformation,
};
use akgeom::families::{find_path, modulated_path, JPath, PathFlags};
use akgeom::forms::ScalarField;
use akgeom::random::FieldSampler;
use akgeom::structure::standard_j;
use akgeom::Error;
use common::*;
use nalgebra::Matrix4;

const SMALL: [usize; 4] = [16, 4, 16, 4];

fn norm(c: &akgeom::structure::CompatibleTriple, f: &ScalarField) -> f64 {
    c.l2_inner_scalar(&f.values, &f.values).sqrt()
}

fn modulated_deformation(res: [usize; 4]) -> Deformation {
    Deformation::new(modulated_path(1.0), grid(res), ContinuationConfig::default()).unwrap()
}

#[test]
fn phi_vanishes_at_base_and_has_zero_mean() {
    let d = modulated_deformation(SMALL);
    let s0 = d.slice(0.0).unwrap();
    let e = d.phi(&s0, &ScalarField::zeros(*d.grid())).unwrap();
    assert!(e.phi.sup_norm() <= 1e-12);
    let f = probe_sampler(d.base(), 3).scalar_zero_mean().scaled(0.05);
    let e = d.phi(&s0, &f).unwrap();
    assert!(e.triple.mean(&e.phi.values).abs() <= 1e-12 * e.phi.sup_norm().max(1.0));
}

#[test]
fn phi_linearization_is_the_model_operator() {
    let d = modulated_deformation(SMALL);
    let s0 = d.slice(0.0).unwrap();
    let fdot = probe_sampler(d.base(), 4).scalar_zero_mean();
    let der1 = model_operator(d.base(), 0.0, &fdot).unwrap();
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&eps| {
            let p = d.phi(&s0, &fdot.scaled(eps)).unwrap().phi;
            norm(d.base(), &p.sub(&der1.scaled(eps)))
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.9, "order {order:.3} from {errs:?}");
    }
}

#[test]
fn flat_linearization_on_a_mode() {
    let d = modulated_deformation(SMALL);
    let s0 = d.slice(0.0).unwrap();
    let e = d.phi(&s0, &ScalarField::zeros(*d.grid())).unwrap();
    let k = [1.0, 0.0, 2.0, 0.0];
    let m = ScalarField::from_fn(*d.grid(), |x| (2.0 * PI * (k[0] * x[0] + k[2] * x[2])).sin());
    let l = d.linearized(&e, d.base(), &m).unwrap();
    let k2: f64 = k.iter().map(|v| v * v).sum();
    let expected = m.scaled(-4.0 * PI * PI * k2);
    assert!(rel_scalar(d.base(), &l, &expected) <= 1e-10);
}

#[test]
fn linearization_is_symmetric_and_definite() {
    let d = modulated_deformation(SMALL);
    let s0 = d.slice(0.0).unwrap();
    let e = d.phi(&s0, &ScalarField::zeros(*d.grid())).unwrap();
    let op = |f: &ScalarField| d.linearized(&e, d.base(), f);
    let mut s = probe_sampler(d.base(), 5);
    for _ in 0..3 {
        let (u, v) = (s.scalar_zero_mean(), s.scalar_zero_mean());
        assert!(symmetry_defect(d.base(), &u, &v, op).unwrap() <= 1e-8);
    }
    let probes: Vec<ScalarField> = (0..8).map(|_| s.scalar_zero_mean()).collect();
    let ev = ritz_values(d.base(), &probes, |f| op(f).map(|l| l.scaled(-1.0))).unwrap();
    assert!(ev[0] > 0.0, "smallest Ritz value {:.3e}", ev[0]);
}

#[test]
fn variation_of_zero_is_zero() {
    let c = flat([8, 4, 8, 4]);
    let r = variation_check(&c, &ScalarField::zeros(*c.grid())).unwrap();
    for e in [r.volume, r.ricci, r.scalar] {
        assert_eq!(e.coarse, 0.0);
        assert_eq!(e.extrapolated, 0.0);
    }
}

#[test]
fn variation_formulas_on_flat_torus() {
    let c = flat(SMALL);
    let fdot = ScalarField::from_fn(*c.grid(), |x| 0.3 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[2]).sin());
    let r = variation_check(&c, &fdot).unwrap();
    for (name, e) in [("volume", r.volume), ("ricci", r.ricci), ("scalar", r.scalar)] {
        // Orders are undefined when the difference is exact to round-off.
        match e.order {
            Some(o) => assert!(o >= 1.9, "{name} order {o:.3}"),
            None => assert!(e.coarse <= 1e-10, "{name}"),
        }
        assert!(e.extrapolated <= 1e-6, "{name} extrapolated {:.3e}", e.extrapolated);
    }
    assert!(r.codifferential_identity <= 1e-7);
}

#[test]
fn newton_trivial_start_and_return_to_zero() {
    let d = modulated_deformation(SMALL);
    let s0 = d.slice(0.0).unwrap();
    let st = d.newton(&s0, &ScalarField::zeros(*d.grid())).unwrap();
    assert_eq!(st.diagnostics.newton_iterations, 0);

    // Kept smooth and small so every iterate stays resolved at this grid.
    let f0 = FieldSampler::with_cutoff(d.base().spectral(), 6, [2, 0, 2, 0]).scalar_zero_mean().scaled(3e-4);
    let st = d.newton(&s0, &f0).unwrap();
    assert!(st.converged);
    assert!(st.f.sup_norm() <= 1e-9, "|f| {:.3e}", st.f.sup_norm());
}

#[test]
fn newton_at_positive_t_gives_constant_scalar_curvature() {
    let d = modulated_deformation(SMALL);
    let s = d.slice(0.03).unwrap();
    let st = d.newton(&s, &ScalarField::zeros(*d.grid())).unwrap();
    assert!(st.diagnostics.phi_norm <= 1e-9);
    assert!(st.f.sup_norm() > 1e-6);

    // Rebuild ω_{t,f} and its curvature from f alone.
    let omega = s.cache.omega().add(&dgdc(&s.cache, &st.f).unwrap());
    assert!(s.cache.l2_norm(&omega.sub(&st.omega_tf)) <= 1e-12);
    let triple = s.cache.with_omega(omega).unwrap();
    let curv = hermitian_curvature(&triple).unwrap();
    let mean = triple.mean(&curv.scalar.values);
    let dev = curv.scalar.shift(-mean);
    let stddev = (triple.l2_inner_scalar(&dev.values, &dev.values) / triple.total_volume()).sqrt();
    assert!(stddev <= 1e-6 * (1.0 + mean.abs()), "stddev {stddev:.3e}");

    let exact = st.omega_tf.sub(s.cache.omega());
    assert!(s.cache.l2_norm(&s.cache.harmonic_project(&exact, LaplacianKind::Metric).unwrap()) <= 1e-7);
    assert!(st.diagnostics.mean_drift <= 1e-8 * (st.diagnostics.newton_iterations as f64).max(1.0));
    assert!(st.diagnostics.min_volume_ratio > 0.0);
}

#[test]
fn constant_and_rotation_paths_stay_at_zero() {
    for name in ["torus-constant", "torus-rotation"] {
        let d = Deformation::new(find_path(name).unwrap(), grid([8, 4, 8, 4]), ContinuationConfig::default()).unwrap();
        let out = d.continuation(0.03);
        assert!(out.failure.is_none(), "{name}: {:?}", out.failure);
        assert_eq!(out.states.len(), 4);
        assert!(out.states.iter().all(|s| s.diagnostics.f_norm <= 1e-8), "{name}");
    }
}

#[test]
fn modulated_path_is_non_integrable_away_from_zero() {
    let c = cache(modulated_triple(SMALL, 0.05));
    let conn = akgeom::curvature::hermitian_connection(&c).unwrap();
    assert!(conn.dj_norm(&c) > 1e-3);
    let c0 = cache(modulated_triple(SMALL, 0.0));
    let conn0 = akgeom::curvature::hermitian_connection(&c0).unwrap();
    assert!(conn0.dj_norm(&c0) <= 1e-12);
}

#[test]
fn incompatible_path_fails_cleanly_at_the_offending_step() {
    let flags = PathFlags { compatible: false, smooth_in_t: true, heak_at_zero: true };
    let path = JPath::pointwise("sheared", "J₀ conjugated by a non-symplectic shear", 1.0, flags, |t, _| {
        let mut p = Matrix4::identity();
        p[(0, 2)] = 100.0 * t;
        p * standard_j() * p.try_inverse().unwrap()
    });
    let d = Deformation::new(path, grid([8, 4, 8, 4]), ContinuationConfig::default()).unwrap();
    let out = d.continuation(0.02);
    assert_eq!(out.states.len(), 1);
    let fail = out.failure.unwrap();
    assert!((fail.t - 0.01).abs() < 1e-15);
    assert!(matches!(fail.error, Error::Compatibility { .. }), "{:?}", fail.error);
}

#[test]
fn continuation_is_deterministic() {
    let run = || {
        let d = modulated_deformation(SMALL);
        d.continuation(0.02)
    };
    let (a, b) = (run(), run());
    assert!(a.failure.is_none());
    assert_eq!(a.states.len(), b.states.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.f.values, y.f.values);
        assert_eq!(x.newton_residual_history, y.newton_residual_history);
    }
}
