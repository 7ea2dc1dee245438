mod common;

use akgeom::calculus::{LaplacianKind, TORUS_BETTI};
use akgeom::forms::{wedge, FormField};
use akgeom::random::FieldSampler;
use proptest::prelude::*;

const RES: [usize; 4] = [32, 4, 32, 4];

#[test]
fn harmonic_dimensions_match_torus_betti_numbers() {
    let c = common::modulated(RES, 0.1);
    for kind in [LaplacianKind::Metric, LaplacianKind::Twisted] {
        let dims: Vec<usize> = (0..=4).map(|p| c.harmonic_basis(p, kind).unwrap().len()).collect();
        assert_eq!(dims, TORUS_BETTI.to_vec(), "{kind:?}");
    }
}

#[test]
fn green_inverts_laplacian_off_harmonics() {
    let c = common::modulated(RES, 0.1);
    let mut s = common::probe_sampler(&c, 11);
    for p in 0..=2 {
        let psi = s.form(p);
        let u = c.green(&psi, LaplacianKind::Metric).unwrap();
        let lu = c.laplacian(&u, LaplacianKind::Metric).unwrap();
        let target = psi.sub(&c.harmonic_project(&psi, LaplacianKind::Metric).unwrap());
        assert!(common::rel_form(&c, &lu, &target) < 1e-9, "degree {p}");
        for h in c.harmonic_basis(p, LaplacianKind::Metric).unwrap() {
            assert!(c.l2_inner(&u, h).unwrap().abs() < 1e-10 * c.l2_norm(&u));
        }
    }
}

#[test]
fn green_commutes_with_d_delta_and_star() {
    let c = common::modulated(RES, 0.1);
    let mut s = common::probe_sampler(&c, 12);
    let m = LaplacianKind::Metric;
    let a = s.form(1);
    let gd = c.green(&c.exterior_d(&a).unwrap(), m).unwrap();
    let dg = c.exterior_d(&c.green(&a, m).unwrap()).unwrap();
    assert!(common::rel_form(&c, &gd, &dg) < 1e-8);

    let b = s.form(2);
    let gdelta = c.green(&c.codifferential(&b).unwrap(), m).unwrap();
    let deltag = c.codifferential(&c.green(&b, m).unwrap()).unwrap();
    assert!(common::rel_form(&c, &gdelta, &deltag) < 1e-8);

    let gs = c.green(&c.hodge_star(&b).unwrap(), m).unwrap();
    let sg = c.hodge_star(&c.green(&b, m).unwrap()).unwrap();
    assert!(common::rel_form(&c, &gs, &sg) < 1e-8);

    let ls = c.laplacian(&c.hodge_star(&b).unwrap(), m).unwrap();
    let sl = c.hodge_star(&c.laplacian(&b, m).unwrap()).unwrap();
    assert!(common::rel_form(&c, &ls, &sl) < 1e-9);
}

#[test]
fn twisted_green_commutes_with_dc_and_delta_c() {
    let c = common::modulated(RES, 0.1);
    let mut s = common::probe_sampler(&c, 13);
    let t = LaplacianKind::Twisted;
    let a = s.form(1);
    let gd = c.green(&c.twisted_d(&a).unwrap(), t).unwrap();
    let dg = c.twisted_d(&c.green(&a, t).unwrap()).unwrap();
    assert!(common::rel_form(&c, &gd, &dg) < 1e-8);
    let b = s.form(2);
    let gdelta = c.green(&c.twisted_codifferential(&b).unwrap(), t).unwrap();
    let deltag = c.twisted_codifferential(&c.green(&b, t).unwrap()).unwrap();
    assert!(common::rel_form(&c, &gdelta, &deltag) < 1e-8);
}

#[test]
fn hodge_decomposition_reassembles() {
    let c = common::modulated(RES, 0.1);
    let psi = common::probe_sampler(&c, 14).form(2);
    for kind in [LaplacianKind::Metric, LaplacianKind::Twisted] {
        let parts = c.hodge_decompose(&psi, kind).unwrap();
        let back = c.hodge_reassemble(&parts, kind).unwrap();
        assert!(common::rel_form(&c, &back, &psi) < 1e-9, "{kind:?}");
    }
}

#[test]
fn flat_codifferential_of_sine_form() {
    // δ(sin(2πx⁰) dx⁰) = −2π cos(2πx⁰) on the flat torus
    let c = common::flat([8, 4, 4, 4]);
    let g = *c.grid();
    let psi = FormField::from_fn(g, 1, |x| [(2.0 * std::f64::consts::PI * x[0]).sin(), 0.0, 0.0, 0.0, 0.0, 0.0]);
    let d = c.codifferential(&psi).unwrap();
    for (i, x) in g.points().enumerate() {
        let exact = -2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x[0]).cos();
        assert!((d.comps[0][i] - exact).abs() < 1e-12);
    }
}

fn small() -> akgeom::calculus::SpectralCache {
    common::modulated([8, 4, 8, 4], 0.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn d_squared_and_dc_squared_vanish(seed in any::<u64>(), p in 0usize..=2) {
        let c = small();
        let mut s = FieldSampler::with_cutoff(c.spectral(), seed, [2, 0, 2, 0]);
        let psi = s.form(p);
        let scale = c.l2_norm(&psi).max(1.0) * c.spectral().max_wavenumber().powi(2);
        let dd = c.exterior_d(&c.exterior_d(&psi).unwrap()).unwrap();
        prop_assert!(c.l2_norm(&dd) < 1e-12 * scale);
        let dcdc = c.twisted_d(&c.twisted_d(&psi).unwrap()).unwrap();
        prop_assert!(c.l2_norm(&dcdc) < 1e-9 * scale);
    }

    #[test]
    fn star_is_an_involution_up_to_sign(seed in any::<u64>(), p in 0usize..=4) {
        let c = small();
        let psi = FieldSampler::new(c.spectral(), seed).form(p);
        let ss = c.hodge_star(&c.hodge_star(&psi).unwrap()).unwrap();
        let sign = if (p * (4 - p)) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(common::rel_form(&c, &ss, &psi.scaled(sign)) < 1e-12);
    }

    #[test]
    fn lefschetz_and_contraction_are_adjoint(seed in any::<u64>()) {
        let c = small();
        let mut s = FieldSampler::new(c.spectral(), seed);
        let a = s.form(1);
        let b = s.form(3);
        let lhs = c.l2_inner(&c.lefschetz(&a).unwrap(), &b).unwrap();
        let rhs = c.l2_inner(&a, &c.contraction(&b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (lhs.abs() + rhs.abs()).max(1.0));
    }

    #[test]
    fn wedge_is_graded_commutative(seed in any::<u64>(), p in 0usize..=2, q in 0usize..=2) {
        let c = small();
        let mut s = FieldSampler::new(c.spectral(), seed);
        let a = s.form(p);
        let b = s.form(q);
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(ab.sub(&ba.scaled(sign)).sup_norm() < 1e-12 * (1.0 + ab.sup_norm()));
    }

    #[test]
    fn codifferential_is_adjoint_of_d(seed in any::<u64>(), p in 0usize..=3) {
        let c = small();
        let mut s = FieldSampler::with_cutoff(c.spectral(), seed, [2, 0, 2, 0]);
        let a = s.form(p);
        let b = s.form(p + 1);
        let lhs = c.l2_inner(&c.exterior_d(&a).unwrap(), &b).unwrap();
        let rhs = c.l2_inner(&a, &c.codifferential(&b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (lhs.abs() + rhs.abs()).max(1.0));
    }
}
