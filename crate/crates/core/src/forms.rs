//! Scalar and differential-form fields on the lattice.
//!
//! A p-form is stored in coordinate components, one array per strictly
//! increasing index tuple. Tuples are encoded as 4-bit masks and ordered
//! lexicographically, e.g. degree 2 is `01, 02, 03, 12, 13, 23`.

use std::sync::OnceLock;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, GridSpec};

pub const DIM: usize = 4;

struct Tables {
    basis: [Vec<u8>; 5],
    position: [usize; 16],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut basis: [Vec<u8>; 5] = Default::default();
        let mut position = [0usize; 16];
        for (p, slot) in basis.iter_mut().enumerate() {
            let mut tuples: Vec<Vec<usize>> = (0u8..16)
                .filter(|m| m.count_ones() as usize == p)
                .map(mask_to_indices)
                .collect();
            tuples.sort();
            *slot = tuples.iter().map(|t| indices_to_mask(t)).collect();
            for (i, &m) in slot.iter().enumerate() {
                position[m as usize] = i;
            }
        }
        Tables { basis, position }
    })
}

pub fn mask_to_indices(mask: u8) -> Vec<usize> {
    (0..DIM).filter(|&a| mask & (1 << a) != 0).collect()
}

pub fn indices_to_mask(idx: &[usize]) -> u8 {
    idx.iter().fold(0u8, |m, &a| m | (1 << a))
}

/// Increasing index tuples of degree `p`, as masks, in storage order.
pub fn basis(p: usize) -> &'static [u8] {
    &tables().basis[p]
}

/// Storage position of an index mask within its degree.
pub fn position(mask: u8) -> usize {
    tables().position[mask as usize]
}

pub fn n_components(p: usize) -> usize {
    basis(p).len()
}

/// Index tuples of degree `p` as explicit lists (used in file headers).
pub fn index_tuples(p: usize) -> Vec<Vec<usize>> {
    basis(p).iter().map(|&m| mask_to_indices(m)).collect()
}

/// Sign of `dx^A ∧ dx^B` relative to `dx^{A ∪ B}`; zero when they overlap.
pub fn wedge_sign(a: u8, b: u8) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut inversions = 0;
    for i in 0..DIM {
        if a & (1 << i) != 0 {
            for j in 0..i {
                if b & (1 << j) != 0 {
                    inversions += 1;
                }
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn mask_indices(mask: u8) -> ([usize; 4], usize) {
    let mut out = [0; 4];
    let mut n = 0;
    for a in 0..DIM {
        if mask & (1 << a) != 0 {
            out[n] = a;
            n += 1;
        }
    }
    (out, n)
}

/// Determinant of the submatrix of `m` with the given row and column sets.
#[inline]
pub fn minor(m: &Matrix4<f64>, rows: u8, cols: u8) -> f64 {
    let (r, n) = mask_indices(rows);
    let (c, nc) = mask_indices(cols);
    debug_assert_eq!(n, nc);
    match n {
        0 => 1.0,
        1 => m[(r[0], c[0])],
        2 => m[(r[0], c[0])] * m[(r[1], c[1])] - m[(r[0], c[1])] * m[(r[1], c[0])],
        3 => {
            let e = |i: usize, j: usize| m[(r[i], c[j])];
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
                - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        _ => m.determinant(),
    }
}

/// Small dense matrix acting on the component vector of a p-form at one point.
#[derive(Debug, Clone, Copy)]
pub struct ExtMat {
    pub rows: usize,
    pub cols: usize,
    pub m: [[f64; 6]; 6],
}

impl ExtMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, m: [[0.0; 6]; 6] }
    }

    /// `Λ^p(M)[I][K] = det M[I, K]`.
    pub fn exterior_power(mat: &Matrix4<f64>, p: usize) -> Self {
        let b = basis(p);
        let mut out = Self::zeros(b.len(), b.len());
        for (i, &bi) in b.iter().enumerate() {
            for (k, &bk) in b.iter().enumerate() {
                out.m[i][k] = minor(mat, bi, bk);
            }
        }
        out
    }

    /// Matrix of the pullback `ψ ↦ A^*ψ` on p-form components.
    pub fn pullback(a: &Matrix4<f64>, p: usize) -> Self {
        Self::exterior_power(a, p).transpose()
    }

    /// Matrix of `ψ ↦ ω ∧ ψ` from degree `p` to `p + 2`, given ω's components.
    pub fn lefschetz(omega: &[f64; 6], p: usize) -> Self {
        let src = basis(p);
        let dst = basis(p + 2);
        let mut out = Self::zeros(dst.len(), src.len());
        for (k, &bk) in src.iter().enumerate() {
            for (w, &bw) in basis(2).iter().enumerate() {
                let s = wedge_sign(bw, bk);
                if s != 0.0 {
                    out.m[position(bw | bk)][k] += s * omega[w];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.m[j][i] = self.m[i][j];
            }
        }
        out
    }

    pub fn mul(&self, other: &ExtMat) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut s = 0.0;
                for k in 0..self.cols {
                    s += self.m[i][k] * other.m[k][j];
                }
                out.m[i][j] = s;
            }
        }
        out
    }

    pub fn scale(mut self, s: f64) -> Self {
        for row in self.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }

    pub fn apply(&self, v: &[f64]) -> [f64; 6] {
        let mut out = [0.0; 6];
        for i in 0..self.rows {
            let mut s = 0.0;
            for k in 0..self.cols {
                s += self.m[i][k] * v[k];
            }
            out[i] = s;
        }
        out
    }
}

/// Real function sampled on the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} lattice points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 4]) -> f64) -> Self {
        Self { grid, values: grid.points().map(f).collect() }
    }

    /// Unweighted lattice mean (flat coordinate measure).
    pub fn flat_mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `|mean| ≤ 1e-12 · sup` with respect to the given density.
    pub fn is_zero_mean(&self, density: &[f64]) -> bool {
        let m = weighted_mean(&self.values, density);
        m.abs() <= crate::tolerances::MEAN * self.sup_norm().max(f64::MIN_POSITIVE)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn shift(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v + c).collect() }
    }

    pub fn as_form(&self) -> FormField {
        FormField { grid: self.grid, degree: 0, comps: vec![self.values.clone()] }
    }
}

/// Mean of `values` against a positive density (e.g. the volume form).
pub fn weighted_mean(values: &[f64], density: &[f64]) -> f64 {
    let num = crate::grid::pairwise_sum_by(values.len(), &|i| values[i] * density[i]);
    let den = pairwise_sum(density);
    num / den
}

/// Degree-p differential form sampled on the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormField {
    pub grid: GridSpec,
    pub degree: usize,
    pub comps: Vec<Vec<f64>>,
}

impl FormField {
    pub fn zeros(grid: GridSpec, degree: usize) -> Self {
        assert!(degree <= DIM, "degree {degree} out of range");
        Self { grid, degree, comps: vec![vec![0.0; grid.len()]; n_components(degree)] }
    }

    pub fn new(grid: GridSpec, degree: usize, comps: Vec<Vec<f64>>) -> Result<Self> {
        if degree > DIM {
            return Err(Error::Degree(format!("degree {degree} exceeds 4")));
        }
        if comps.len() != n_components(degree) || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid("component layout does not match degree/grid".into()));
        }
        Ok(Self { grid, degree, comps })
    }

    /// Constant-coefficient form `Σ c_I dx^I`.
    pub fn constant(grid: GridSpec, degree: usize, coeffs: &[f64]) -> Self {
        assert_eq!(coeffs.len(), n_components(degree));
        Self { grid, degree, comps: coeffs.iter().map(|&c| vec![c; grid.len()]).collect() }
    }

    /// Single basis element `dx^I` for an index mask.
    pub fn basis_form(grid: GridSpec, mask: u8) -> Self {
        let p = mask.count_ones() as usize;
        let mut f = Self::zeros(grid, p);
        f.comps[position(mask)].iter_mut().for_each(|v| *v = 1.0);
        f
    }

    /// Build from a pointwise function returning component vectors.
    pub fn from_fn(grid: GridSpec, degree: usize, f: impl Fn([f64; 4]) -> [f64; 6]) -> Self {
        let mut out = Self::zeros(grid, degree);
        for (i, x) in grid.points().enumerate() {
            let v = f(x);
            for (c, comp) in out.comps.iter_mut().enumerate() {
                comp[i] = v[c];
            }
        }
        out
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.degree != 0 {
            return Err(Error::Degree(format!("expected a 0-form, got degree {}", self.degree)));
        }
        Ok(ScalarField { grid: self.grid, values: self.comps[0].clone() })
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 6] {
        let mut v = [0.0; 6];
        for (c, comp) in self.comps.iter().enumerate() {
            v[c] = comp[i];
        }
        v
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: &[f64]) {
        for (c, comp) in self.comps.iter_mut().enumerate() {
            comp[i] = v[c];
        }
    }

    pub fn check_compatible(&self, other: &FormField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.degree != other.degree {
            return Err(Error::Degree(format!(
                "degree mismatch: {} vs {}",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    pub fn map_pointwise(
        &self,
        out_degree: usize,
        f: impl Fn(usize, &[f64; 6]) -> [f64; 6] + Sync,
    ) -> FormField {
        let vals: Vec<[f64; 6]> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| f(i, &self.at(i)))
            .collect();
        FormField::from_points(self.grid, out_degree, &vals)
    }

    /// Assemble from per-point component vectors.
    pub fn from_points(grid: GridSpec, degree: usize, vals: &[[f64; 6]]) -> FormField {
        let nc = n_components(degree);
        FormField {
            grid,
            degree,
            comps: (0..nc).map(|c| vals.iter().map(|v| v[c]).collect()).collect(),
        }
    }

    pub fn add(&self, other: &FormField) -> FormField {
        self.lin(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &FormField) -> FormField {
        self.lin(1.0, other, -1.0)
    }

    pub fn scaled(&self, s: f64) -> FormField {
        FormField {
            grid: self.grid,
            degree: self.degree,
            comps: self.comps.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn lin(&self, a: f64, other: &FormField, b: f64) -> FormField {
        assert_eq!(self.degree, other.degree, "degree mismatch");
        assert_eq!(self.grid, other.grid, "grid mismatch");
        FormField {
            grid: self.grid,
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
                .collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &FormField) {
        for (x, y) in self.comps.iter_mut().zip(&other.comps) {
            for (u, v) in x.iter_mut().zip(y) {
                *u += a * v;
            }
        }
    }

    /// Multiply pointwise by a function.
    pub fn mul_scalar_field(&self, f: &[f64]) -> FormField {
        FormField {
            grid: self.grid,
            degree: self.degree,
            comps: self.comps.iter().map(|c| c.iter().zip(f).map(|(u, v)| u * v).collect()).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Flattened component data, the vector space used by the Krylov solvers.
    pub fn flatten(&self) -> Vec<f64> {
        self.comps.concat()
    }

    pub fn from_flat(grid: GridSpec, degree: usize, flat: &[f64]) -> FormField {
        let n = grid.len();
        FormField {
            grid,
            degree,
            comps: flat.chunks(n).map(<[f64]>::to_vec).collect(),
        }
    }
}

/// Graded-commutative wedge product.
pub fn wedge(a: &FormField, b: &FormField) -> Result<FormField> {
    a.grid.check_same(&b.grid)?;
    let p = a.degree + b.degree;
    if p > DIM {
        return Err(Error::Degree(format!("wedge of degrees {} and {} exceeds 4", a.degree, b.degree)));
    }
    let mut terms = Vec::new();
    for (i, &ma) in basis(a.degree).iter().enumerate() {
        for (k, &mb) in basis(b.degree).iter().enumerate() {
            let s = wedge_sign(ma, mb);
            if s != 0.0 {
                terms.push((i, k, position(ma | mb), s));
            }
        }
    }
    let mut out = FormField::zeros(a.grid, p);
    for &(i, k, dst, s) in &terms {
        let (ai, bk) = (&a.comps[i], &b.comps[k]);
        for (o, (x, y)) in out.comps[dst].iter_mut().zip(ai.iter().zip(bk)) {
            *o += s * x * y;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_ordering_is_lexicographic() {
        assert_eq!(index_tuples(2), vec![
            vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]
        ]);
        assert_eq!(n_components(0), 1);
        assert_eq!(n_components(3), 4);
        assert_eq!(index_tuples(3)[0], vec![0, 1, 2]);
        for p in 0..=4 {
            for (i, &m) in basis(p).iter().enumerate() {
                assert_eq!(position(m), i);
            }
        }
    }

    #[test]
    fn wedge_signs() {
        assert_eq!(wedge_sign(0b0001, 0b0010), 1.0);
        assert_eq!(wedge_sign(0b0010, 0b0001), -1.0);
        assert_eq!(wedge_sign(0b0011, 0b1100), 1.0);
        assert_eq!(wedge_sign(0b0101, 0b1010), -1.0);
        assert_eq!(wedge_sign(0b0011, 0b0010), 0.0);
    }

    #[test]
    fn omega_squared_is_twice_volume() {
        let g = GridSpec::cubic(4).unwrap();
        let omega = FormField::constant(g, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let w = wedge(&omega, &omega).unwrap();
        assert!(w.comps[0].iter().all(|&v| v == 2.0));
    }

    #[test]
    fn one_form_wedge_itself_vanishes() {
        let g = GridSpec::cubic(4).unwrap();
        let a = FormField::from_fn(g, 1, |x| [x[0].sin(), x[1], 2.0 * x[2], x[3].cos(), 0.0, 0.0]);
        let w = wedge(&a, &a).unwrap();
        assert!(w.sup_norm() < 1e-15);
    }

    #[test]
    fn exterior_power_is_multiplicative() {
        let a = Matrix4::new(1.0, 2.0, 0.5, 0.0, 0.3, 1.0, -1.0, 2.0, 0.0, 0.7, 1.5, 0.2, 1.1, 0.0, 0.4, 1.0);
        let b = Matrix4::new(0.2, 1.0, 0.0, 0.3, -1.0, 0.5, 0.1, 0.0, 0.6, 0.0, 1.0, 0.9, 0.0, 0.4, -0.3, 1.2);
        for p in 0..=4 {
            let lhs = ExtMat::exterior_power(&(a * b), p);
            let rhs = ExtMat::exterior_power(&a, p).mul(&ExtMat::exterior_power(&b, p));
            for i in 0..lhs.rows {
                for j in 0..lhs.cols {
                    assert!((lhs.m[i][j] - rhs.m[i][j]).abs() < 1e-12);
                }
            }
        }
    }
}
