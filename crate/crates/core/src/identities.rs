//! Operator identities between `d`, `d^c`, `δ^g`, `δ^c`, `L_ω` and `Λ_ω`, sampled on random fields.

use serde::{Deserialize, Serialize};

use crate::calculus::SpectralCache;
use crate::error::Result;
use crate::forms::FormField;
use crate::random::FieldSampler;

/// The five sampled identities, in report order.
pub const IDENTITY_NAMES: [&str; 5] = [
    "[Λ_ω, d^c] = δ^g",
    "[Λ_ω, d] = −δ^c",
    "[L_ω, δ^g] = d^c",
    "d^c δ^g + δ^g d^c = 0",
    "d δ^c + δ^c d = 0",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub name: String,
    /// Worst relative residual over all fields and degrees.
    pub max_residual: f64,
    pub samples: usize,
}

type Op<'a> = dyn Fn(&FormField) -> Result<Option<FormField>> + 'a;

fn d(c: &SpectralCache) -> Box<Op<'_>> {
    Box::new(move |v| if v.degree < 4 { c.exterior_d(v).map(Some) } else { Ok(None) })
}

fn dc(c: &SpectralCache) -> Box<Op<'_>> {
    Box::new(move |v| if v.degree < 4 { c.twisted_d(v).map(Some) } else { Ok(None) })
}

fn delta(c: &SpectralCache) -> Box<Op<'_>> {
    Box::new(move |v| if v.degree > 0 { c.codifferential(v).map(Some) } else { Ok(None) })
}

fn delta_c(c: &SpectralCache) -> Box<Op<'_>> {
    Box::new(move |v| if v.degree > 0 { c.twisted_codifferential(v).map(Some) } else { Ok(None) })
}

fn lef(c: &SpectralCache) -> Box<Op<'_>> {
    Box::new(move |v| if v.degree <= 2 { c.lefschetz(v).map(Some) } else { Ok(None) })
}

fn lam(c: &SpectralCache) -> Box<Op<'_>> {
    Box::new(move |v| if v.degree >= 2 { c.contraction(v).map(Some) } else { Ok(None) })
}

fn then(a: &Op, b: &Op, v: &FormField) -> Result<Option<FormField>> {
    match a(v)? {
        Some(w) => b(&w),
        None => Ok(None),
    }
}

fn sum(a: Option<FormField>, b: Option<FormField>, sb: f64) -> Option<FormField> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.lin(1.0, &y, sb)),
        (Some(x), None) => Some(x),
        (None, Some(y)) => Some(y.scaled(sb)),
        (None, None) => None,
    }
}

fn norm(c: &SpectralCache, v: &Option<FormField>) -> f64 {
    v.as_ref().map_or(0.0, |w| c.l2_norm(w))
}

/// `(x ∘ y) + s·(y ∘ x) − r·rhs`, relative to the size of the operator terms.
fn residual(c: &SpectralCache, x: &Op, y: &Op, s: f64, rhs: Option<(&Op, f64)>, v: &FormField) -> Result<f64> {
    let a = then(y, x, v)?;
    let b = then(x, y, v)?;
    let scale = norm(c, &a) + norm(c, &b);
    let lhs = sum(a, b, s);
    let diff = match rhs {
        Some((op, r)) => sum(lhs, op(v)?, -r),
        None => lhs,
    };
    let n = norm(c, &diff);
    Ok(if scale > 0.0 { n / scale } else { n })
}

/// Sample all five identities on `n_fields` random forms of each degree 1–3.
pub fn commutator_suite(cache: &SpectralCache, n_fields: usize, seed: u64) -> Result<Vec<IdentityResidual>> {
    let mut sampler = FieldSampler::new(cache.spectral(), seed);
    let fields: Vec<FormField> =
        (1..=3).flat_map(|p| (0..n_fields).map(move |_| p)).map(|p| sampler.form(p)).collect();
    let (d, dc, delta, delta_c, lef, lam) = (d(cache), dc(cache), delta(cache), delta_c(cache), lef(cache), lam(cache));
    let checks: [Box<dyn Fn(&FormField) -> Result<f64>>; 5] = [
        Box::new(|v| residual(cache, &*lam, &*dc, -1.0, Some((&*delta, 1.0)), v)),
        Box::new(|v| residual(cache, &*lam, &*d, -1.0, Some((&*delta_c, -1.0)), v)),
        Box::new(|v| residual(cache, &*lef, &*delta, -1.0, Some((&*dc, 1.0)), v)),
        Box::new(|v| residual(cache, &*dc, &*delta, 1.0, None, v)),
        Box::new(|v| residual(cache, &*d, &*delta_c, 1.0, None, v)),
    ];
    IDENTITY_NAMES
        .iter()
        .zip(checks.iter())
        .map(|(name, check)| {
            let mut worst = 0.0f64;
            for v in &fields {
                worst = worst.max(check(v)?);
            }
            Ok(IdentityResidual { name: name.to_string(), max_residual: worst, samples: fields.len() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::GreenSolveConfig;
    use crate::families::modulated_j;
    use crate::forms::FormField;
    use crate::grid::GridSpec;
    use crate::structure::{AlmostComplexField, CompatibleTriple, OmegaChoice};

    #[test]
    fn identities_hold_on_modulated_structure() {
        let g = GridSpec::with_resolution([16, 4, 16, 4]).unwrap();
        let omega = FormField::constant(g, 2, &OmegaChoice::StandardDarboux.components());
        let j = AlmostComplexField::from_fn(g, |x| modulated_j(0.2, 1.0, x));
        let c = SpectralCache::new(CompatibleTriple::new(omega, j).unwrap(), GreenSolveConfig::default()).unwrap();
        for r in commutator_suite(&c, 2, 5).unwrap() {
            assert!(r.max_residual < 1e-8, "{}: {:e}", r.name, r.max_residual);
        }
    }
}
