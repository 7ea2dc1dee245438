#![allow(dead_code)]

use akgeom::calculus::{GreenSolveConfig, SpectralCache};
use akgeom::families::{find_path, modulated_j};
use akgeom::forms::{FormField, ScalarField};
use akgeom::grid::GridSpec;
use akgeom::random::FieldSampler;
use akgeom::structure::{flat_triple, AlmostComplexField, CompatibleTriple, OmegaChoice};

pub fn grid(res: [usize; 4]) -> GridSpec {
    GridSpec::with_resolution(res).unwrap()
}

pub fn cache(triple: CompatibleTriple) -> SpectralCache {
    SpectralCache::new(triple, GreenSolveConfig::default()).unwrap()
}

pub fn flat(res: [usize; 4]) -> SpectralCache {
    cache(flat_triple(grid(res)).unwrap())
}

pub fn modulated_triple(res: [usize; 4], t: f64) -> CompatibleTriple {
    let g = grid(res);
    let omega = FormField::constant(g, 2, &OmegaChoice::StandardDarboux.components());
    CompatibleTriple::new(omega, AlmostComplexField::from_fn(g, |x| modulated_j(t, 1.0, x))).unwrap()
}

pub fn modulated(res: [usize; 4], t: f64) -> SpectralCache {
    cache(modulated_triple(res, t))
}

pub fn path_triple(name: &str, res: [usize; 4], t: f64) -> CompatibleTriple {
    let g = grid(res);
    let p = find_path(name).unwrap();
    let omega = FormField::constant(g, 2, &p.omega_choice().components());
    CompatibleTriple::new(omega, p.at(t, &g).unwrap()).unwrap()
}

/// Probe band `n/4` on axes with more than four points, constant along the others.
pub fn probe_cutoff(g: &GridSpec) -> [usize; 4] {
    std::array::from_fn(|a| if g.resolution[a] <= 4 { 0 } else { g.resolution[a] / 4 })
}

pub fn probe_sampler(c: &SpectralCache, seed: u64) -> FieldSampler<'_> {
    FieldSampler::with_cutoff(c.spectral(), seed, probe_cutoff(c.grid()))
}

pub fn rel_scalar(c: &CompatibleTriple, a: &ScalarField, b: &ScalarField) -> f64 {
    let d = a.sub(b);
    let nb = c.l2_inner_scalar(&b.values, &b.values).sqrt();
    c.l2_inner_scalar(&d.values, &d.values).sqrt() / nb
}

pub fn rel_form(c: &CompatibleTriple, a: &FormField, b: &FormField) -> f64 {
    c.l2_norm(&a.sub(b)) / c.l2_norm(b)
}
