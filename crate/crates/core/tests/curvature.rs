mod common;

use std::f64::consts::PI;

use akgeom::calculus::{dc_scalar, LaplacianKind};
use akgeom::curvature::{
    check_resolution, conformal_shift_check, curvature, heak_report, hermitian_connection, hermitian_curvature,
    ricci_closedness, scalar_from_trace, ConformalConfig, CurvatureRoute,
};
use akgeom::forms::ScalarField;
use akgeom::structure::{omega_matrix, standard_j, AlmostComplexField, CompatibleTriple};
use akgeom::Error;
use nalgebra::Matrix4;

const RES: [usize; 4] = [32, 4, 32, 4];

/// Riemannian scalar curvature from Christoffel symbols, with spectral derivatives.
fn riemannian_scalar(sp: &akgeom::fft::Spectral, g: &[Matrix4<f64>]) -> Vec<f64> {
    let n = g.len();
    let entries: Vec<Vec<f64>> = (0..16).map(|e| g.iter().map(|m| m[(e / 4, e % 4)]).collect()).collect();
    let refs: Vec<&[f64]> = entries.iter().map(Vec::as_slice).collect();
    let dg = sp.gradients(&refs); // dg[4i+j][k] = ∂_k g_ij
    let ginv: Vec<Matrix4<f64>> = g.iter().map(|m| m.try_inverse().unwrap()).collect();
    // gamma[(k*4 + i)*4 + j] = Γ^k_ij
    let mut gamma = vec![vec![0.0; n]; 64];
    for p in 0..n {
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let mut s = 0.0;
                    for l in 0..4 {
                        s += ginv[p][(k, l)] * (dg[4 * l + j][i][p] + dg[4 * l + i][j][p] - dg[4 * i + j][l][p]);
                    }
                    gamma[(k * 4 + i) * 4 + j][p] = 0.5 * s;
                }
            }
        }
    }
    let grefs: Vec<&[f64]> = gamma.iter().map(Vec::as_slice).collect();
    let dgamma = sp.gradients(&grefs);
    let gm = |k: usize, i: usize, j: usize, p: usize| gamma[(k * 4 + i) * 4 + j][p];
    (0..n)
        .map(|p| {
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    let mut ric = 0.0;
                    for k in 0..4 {
                        ric += dgamma[(k * 4 + i) * 4 + j][k][p] - dgamma[(k * 4 + i) * 4 + k][j][p];
                        for l in 0..4 {
                            ric += gm(k, k, l, p) * gm(l, i, j, p) - gm(k, j, l, p) * gm(l, i, k, p);
                        }
                    }
                    s += ginv[p][(i, j)] * ric;
                }
            }
            s
        })
        .collect()
}

fn kahler_triple() -> CompatibleTriple {
    let flat = common::flat(RES);
    let g = *flat.grid();
    let a = 0.1 / (8.0 * PI * PI);
    let phi = ScalarField::from_fn(g, |x| a * ((2.0 * PI * x[0]).cos() * (2.0 * PI * x[2]).cos() + (2.0 * PI * x[0]).sin()));
    let ddc = flat.exterior_d(&dc_scalar(&flat, &phi).unwrap()).unwrap();
    let omega = flat.omega().add(&ddc);
    CompatibleTriple::new(omega, AlmostComplexField::constant(g, standard_j())).unwrap()
}

#[test]
fn flat_and_rotated_structures_have_zero_ricci_form() {
    for (name, t) in [("torus-constant", 0.0), ("torus-rotation", 0.7)] {
        let tr = common::path_triple(name, [8, 4, 8, 4], t);
        let c = hermitian_curvature(&tr).unwrap();
        assert!(c.ricci_form.sup_norm() < 1e-13, "{name}");
        assert!(heak_report(&tr, &c).unwrap().heak);
    }
}

#[test]
fn kahler_scalar_curvature_matches_riemannian_oracle() {
    let tr = kahler_triple();
    let g: Vec<Matrix4<f64>> = (0..tr.grid().len())
        .map(|i| {
            let gi = omega_matrix(&tr.omega().at(i)) * tr.j(i);
            assert!((gi - tr.g(i)).amax() < 1e-13);
            gi
        })
        .collect();
    let oracle = riemannian_scalar(tr.spectral(), &g);
    let s = hermitian_curvature(&tr).unwrap().scalar;
    let so = ScalarField { grid: *tr.grid(), values: oracle };
    assert!(so.sup_norm() > 0.5, "test metric should be curved");
    assert!(common::rel_scalar(&tr, &s, &so) < 1e-9);
    let conn = hermitian_connection(&tr).unwrap();
    assert!(conn.dj_norm(&tr) < 1e-12, "Kähler: D^g J = 0");
}

#[test]
fn ricci_routes_agree_and_rho_is_closed() {
    for tr in [common::modulated_triple(RES, 0.1), common::path_triple("torus-generic", RES, 0.05)] {
        check_resolution(&tr).unwrap();
        let conn = hermitian_connection(&tr).unwrap();
        assert!(conn.metric_residual(&tr) < 1e-12);
        assert!(conn.j_residual(&tr) < 1e-12);
        let trace = curvature(&tr, &conn, CurvatureRoute::Trace).unwrap();
        let full = curvature(&tr, &conn, CurvatureRoute::Full).unwrap();
        let rho = tr.l2_norm(&trace.ricci_form);
        assert!(rho > 1e-3, "non-trivial curvature expected");
        assert!(tr.l2_norm(&trace.ricci_form.sub(&full.ricci_form)) < 1e-10 * rho);
        assert!(ricci_closedness(&tr, &trace).unwrap() < 1e-9);
        let s_trace = scalar_from_trace(&tr, &trace.ricci_form).unwrap();
        assert!(common::rel_scalar(&tr, &s_trace, &trace.scalar) < 1e-12);
    }
}

#[test]
fn harmonic_part_of_rho_is_stable_along_the_family() {
    // c₁ of the torus vanishes, so every ρ_t is exact
    let mut norms = Vec::new();
    for t in [0.05, 0.1, 0.15] {
        let c = common::modulated(RES, t);
        let rho = hermitian_curvature(&c).unwrap().ricci_form;
        let h = c.harmonic_project(&rho, LaplacianKind::Metric).unwrap();
        norms.push(c.l2_norm(&h) / c.l2_norm(&rho));
    }
    assert!(norms.iter().all(|n| *n < 1e-9), "{norms:?}");
}

#[test]
fn conformal_shift_on_flat_base() {
    let c = common::flat([4, 16, 4, 4]);
    let f = ScalarField::from_fn(*c.grid(), |x| 0.1 * (2.0 * PI * x[1]).sin());
    let r = conformal_shift_check(&c, &f, &ConformalConfig::default()).unwrap();
    assert!(r.residual < 1e-6, "{r:?}");
    assert!(r.volume_error < 1e-12);
}

#[test]
fn under_resolved_structure_is_reported() {
    let tr = common::modulated_triple([8, 4, 8, 4], 0.3);
    assert!(matches!(hermitian_curvature(&tr), Err(Error::Resolution { .. })));
}
