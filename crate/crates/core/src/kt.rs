//! Exact invariant-form calculus on four-dimensional Lie algebras, and the
//! Kodaira–Thurston certificate.
//!
//! Forms are written in a left-invariant coframe `e⁰..e³`; the exterior
//! derivative is fixed by the structure equations `de^k`. All arithmetic is
//! over ℚ.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{basis, n_components, position, wedge_sign, DIM};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn sign_q(s: f64) -> Q {
    if s > 0.0 {
        Q::one()
    } else if s < 0.0 {
        -Q::one()
    } else {
        Q::zero()
    }
}

/// Dense rational matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Q>,
}

impl QMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Q::one();
        }
        m
    }

    pub fn from_ints(rows: usize, cols: usize, v: &[i64]) -> Self {
        assert_eq!(v.len(), rows * cols);
        Self { rows, cols, data: v.iter().map(|&x| q(x)).collect() }
    }

    pub fn at(&self, r: usize, c: usize) -> &Q {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Q) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, o: &QMat) -> QMat {
        assert_eq!(self.cols, o.rows);
        let mut out = QMat::zeros(self.rows, o.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..o.cols {
                    let v = out.at(r, c) + a * o.at(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn add(&self, o: &QMat) -> QMat {
        QMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &QMat) -> QMat {
        QMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: &Q) -> QMat {
        QMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn transpose(&self) -> QMat {
        let mut out = QMat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.at(r, c).clone());
            }
        }
        out
    }

    pub fn commutator(&self, o: &QMat) -> QMat {
        self.mul(o).sub(&o.mul(self))
    }

    pub fn trace(&self) -> Q {
        (0..self.rows.min(self.cols)).fold(Q::zero(), |s, i| s + self.at(i, i))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    /// Vertical concatenation.
    pub fn stack(&self, o: &QMat) -> QMat {
        assert_eq!(self.cols, o.cols);
        let mut data = self.data.clone();
        data.extend(o.data.iter().cloned());
        QMat { rows: self.rows + o.rows, cols: self.cols, data }
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (QMat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m.at(r, col).is_zero()) else { continue };
            for c in 0..m.cols {
                m.data.swap(p * m.cols + c, row * m.cols + c);
            }
            let inv = m.at(row, col).recip();
            for c in 0..m.cols {
                let v = m.at(row, c) * &inv;
                m.set(row, c, v);
            }
            for r in 0..m.rows {
                if r != row && !m.at(r, col).is_zero() {
                    let f = m.at(r, col).clone();
                    for c in 0..m.cols {
                        let v = m.at(r, c) - &f * m.at(row, c);
                        m.set(r, c, v);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right null space, one vector per free column.
    pub fn null_space(&self) -> Vec<Vec<Q>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Q::zero(); self.cols];
                v[f] = Q::one();
                for (i, &p) in pivots.iter().enumerate() {
                    v[p] = -r.at(i, f).clone();
                }
                v
            })
            .collect()
    }

    pub fn determinant(&self) -> Q {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Q::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| !m.at(r, col).is_zero()) else { return Q::zero() };
            if p != col {
                for c in 0..n {
                    m.data.swap(p * n + c, col * n + c);
                }
                det = -det;
            }
            let piv = m.at(col, col).clone();
            det *= &piv;
            for r in col + 1..n {
                let f = m.at(r, col) / &piv;
                for c in col..n {
                    let v = m.at(r, c) - &f * m.at(col, c);
                    m.set(r, c, v);
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> Option<QMat> {
        let n = self.rows;
        let mut aug = QMat::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.at(r, c).clone());
            }
            aug.set(r, n + r, Q::one());
        }
        let (red, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut out = QMat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, red.at(r, n + c).clone());
            }
        }
        Some(out)
    }

    /// `Λ^p M` in the lexicographic basis of p-forms.
    pub fn exterior_power(&self, p: usize) -> QMat {
        let b = basis(p);
        let mut out = QMat::zeros(b.len(), b.len());
        for (i, &ri) in b.iter().enumerate() {
            for (k, &ck) in b.iter().enumerate() {
                let rows: Vec<usize> = (0..DIM).filter(|a| ri & (1 << a) != 0).collect();
                let cols: Vec<usize> = (0..DIM).filter(|a| ck & (1 << a) != 0).collect();
                let sub = QMat {
                    rows: p,
                    cols: p,
                    data: rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).map(|(r, c)| self.at(r, c).clone()).collect(),
                };
                out.set(i, k, if p == 0 { Q::one() } else { sub.determinant() });
            }
        }
        out
    }

    pub fn apply(&self, v: &[Q]) -> Vec<Q> {
        (0..self.rows).map(|r| (0..self.cols).fold(Q::zero(), |s, c| s + self.at(r, c) * &v[c])).collect()
    }
}

/// Invariant form with exact coefficients on the lexicographic basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantForm {
    pub degree: usize,
    pub coeffs: Vec<Q>,
}

impl InvariantForm {
    pub fn zero(degree: usize) -> Self {
        Self { degree, coeffs: vec![Q::zero(); n_components(degree)] }
    }

    pub fn new(degree: usize, coeffs: Vec<Q>) -> Result<Self> {
        if degree > DIM || coeffs.len() != n_components(degree) {
            return Err(Error::Degree(format!("{} coefficients for a {degree}-form", coeffs.len())));
        }
        Ok(Self { degree, coeffs })
    }

    pub fn from_ints(degree: usize, v: &[i64]) -> Result<Self> {
        Self::new(degree, v.iter().map(|&x| q(x)).collect())
    }

    /// Coframe element `e^k`.
    pub fn coframe(k: usize) -> Self {
        let mut f = Self::zero(1);
        f.coeffs[k] = Q::one();
        f
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { degree: self.degree, coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { degree: self.degree, coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: &Q) -> Self {
        Self { degree: self.degree, coeffs: self.coeffs.iter().map(|a| a * s).collect() }
    }

    pub fn wedge(&self, o: &Self) -> Result<Self> {
        let p = self.degree + o.degree;
        if p > DIM {
            return Err(Error::Degree(format!("wedge of degrees {} and {}", self.degree, o.degree)));
        }
        let mut out = Self::zero(p);
        for (i, &ma) in basis(self.degree).iter().enumerate() {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for (k, &mb) in basis(o.degree).iter().enumerate() {
                let s = wedge_sign(ma, mb);
                if s != 0.0 {
                    out.coeffs[position(ma | mb)] += sign_q(s) * &self.coeffs[i] * &o.coeffs[k];
                }
            }
        }
        Ok(out)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(to_f64).collect()
    }
}

pub fn to_f64(x: &Q) -> f64 {
    let n: f64 = x.numer().to_string().parse().unwrap_or(f64::NAN);
    let d: f64 = x.denom().to_string().parse().unwrap_or(f64::NAN);
    n / d
}

/// Exterior algebra of a 4-dimensional Lie algebra dual, given by `de^k`.
#[derive(Debug, Clone)]
pub struct InvariantAlgebra {
    pub names: [String; 4],
    pub structure: [InvariantForm; 4],
}

impl InvariantAlgebra {
    pub fn new(names: [&str; 4], structure: [InvariantForm; 4]) -> Result<Self> {
        if structure.iter().any(|s| s.degree != 2) {
            return Err(Error::Degree("structure equations must be 2-forms".into()));
        }
        let alg = Self { names: names.map(String::from), structure };
        for k in 0..4 {
            if !alg.d(&alg.structure[k])?.is_zero() {
                return Err(Error::Config(format!("structure equations violate d² = 0 at d({})", alg.names[k])));
            }
        }
        Ok(alg)
    }

    /// Abelian algebra (flat torus).
    pub fn abelian() -> Self {
        Self {
            names: ["e0", "e1", "e2", "e3"].map(String::from),
            structure: std::array::from_fn(|_| InvariantForm::zero(2)),
        }
    }

    /// `ℝ ⊕ 𝔫𝔦𝔩₃` in the coframe `(dx, dt, dy, γ = dz − x dy)`, with `dγ = −dx∧dy`.
    pub fn kodaira_thurston() -> Self {
        let mut dgamma = InvariantForm::zero(2);
        dgamma.coeffs[position(0b0101)] = -Q::one();
        Self {
            names: ["dx", "dt", "dy", "γ"].map(String::from),
            structure: [InvariantForm::zero(2), InvariantForm::zero(2), InvariantForm::zero(2), dgamma],
        }
    }

    /// Exterior derivative by the Leibniz rule on coframe monomials.
    pub fn d(&self, psi: &InvariantForm) -> Result<InvariantForm> {
        let p = psi.degree;
        if p >= DIM {
            return Err(Error::Degree(format!("d of a {p}-form on a 4-dimensional algebra")));
        }
        let mut out = InvariantForm::zero(p + 1);
        for (i, &m) in basis(p).iter().enumerate() {
            if psi.coeffs[i].is_zero() {
                continue;
            }
            let idx: Vec<usize> = (0..DIM).filter(|a| m & (1 << a) != 0).collect();
            for (slot, &k) in idx.iter().enumerate() {
                let mut term = InvariantForm::from_ints(0, &[1])?;
                for (s, &l) in idx.iter().enumerate() {
                    let factor = if s == slot { self.structure[k].clone() } else { InvariantForm::coframe(l) };
                    term = term.wedge(&factor)?;
                }
                let sign = if slot % 2 == 0 { Q::one() } else { -Q::one() };
                out = out.add(&term.scale(&(sign * &psi.coeffs[i])));
            }
        }
        Ok(out)
    }

    /// Matrix of d from p-forms to (p+1)-forms.
    pub fn d_matrix(&self, p: usize) -> Result<QMat> {
        let np = n_components(p);
        let mut m = QMat::zeros(n_components(p + 1), np);
        for c in 0..np {
            let mut e = InvariantForm::zero(p);
            e.coeffs[c] = Q::one();
            let de = self.d(&e)?;
            for (r, v) in de.coeffs.into_iter().enumerate() {
                m.set(r, c, v);
            }
        }
        Ok(m)
    }

    /// `c^k_{ij}` with `[e_i, e_j] = c^k_{ij} e_k`, from `de^k(e_i, e_j) = −c^k_{ij}`.
    pub fn structure_constants(&self) -> [[[Q; 4]; 4]; 4] {
        std::array::from_fn(|k| {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    if i == j {
                        return Q::zero();
                    }
                    let (a, b, s) = if i < j { (i, j, -Q::one()) } else { (j, i, Q::one()) };
                    s * &self.structure[k].coeffs[position((1 << a) | (1 << b))]
                })
            })
        })
    }
}

/// Invariant almost-Kähler structure `(ω, J)` on an invariant algebra.
#[derive(Debug, Clone)]
pub struct InvariantStructure {
    pub algebra: InvariantAlgebra,
    pub omega: InvariantForm,
    /// `J` on vectors; column b is `J e_b`.
    pub j: QMat,
    pub g: QMat,
    pub ginv: QMat,
    /// `ω²/2 = vol · e⁰¹²³`.
    pub vol: Q,
}

fn omega_matrix_q(w: &InvariantForm) -> QMat {
    let mut m = QMat::zeros(4, 4);
    for (k, &mask) in basis(2).iter().enumerate() {
        let a = mask.trailing_zeros() as usize;
        let b = 7 - mask.leading_zeros() as usize;
        m.set(a, b, w.coeffs[k].clone());
        m.set(b, a, -w.coeffs[k].clone());
    }
    m
}

impl InvariantStructure {
    pub fn new(algebra: InvariantAlgebra, omega: InvariantForm, j: QMat) -> Result<Self> {
        let fail = |reason: &str| Error::Compatibility { point: 0, reason: reason.into() };
        if !algebra.d(&omega)?.is_zero() {
            return Err(Error::Closedness { residual: f64::NAN });
        }
        if !j.mul(&j).add(&QMat::identity(4)).is_zero() {
            return Err(fail("J² ≠ −Id"));
        }
        let w = omega_matrix_q(&omega);
        if !j.transpose().mul(&w).mul(&j).sub(&w).is_zero() {
            return Err(fail("ω(J·,J·) ≠ ω"));
        }
        let g = w.mul(&j);
        if g != g.transpose() {
            return Err(fail("ω(·,J·) not symmetric"));
        }
        for k in 1..=4 {
            let lead = QMat {
                rows: k,
                cols: k,
                data: (0..k).flat_map(|r| (0..k).map(move |c| (r, c))).map(|(r, c)| g.at(r, c).clone()).collect(),
            };
            if !lead.determinant().is_positive() {
                return Err(fail("ω(·,J·) not positive definite"));
            }
        }
        let c = &omega.coeffs;
        let vol = &c[0] * &c[5] - &c[1] * &c[4] + &c[2] * &c[3];
        if !vol.is_positive() {
            return Err(fail("ω²/2 is not positively oriented"));
        }
        let ginv = g.inverse().expect("positive definite");
        Ok(Self { algebra, omega, j, g, ginv, vol })
    }

    /// The Example structure: `ω = dx∧dt + dy∧γ`, `J dx = dt`, `J dy = γ`.
    pub fn kodaira_thurston() -> Self {
        let omega = InvariantForm::from_ints(2, &[1, 0, 0, 0, 0, 1]).unwrap();
        let j = QMat::from_ints(4, 4, &[0, -1, 0, 0, 1, 0, 0, 0, 0, 0, 0, -1, 0, 0, 1, 0]);
        Self::new(InvariantAlgebra::kodaira_thurston(), omega, j).expect("Kodaira–Thurston structure is almost-Kähler")
    }

    /// `G_p = Λ^p(g⁻¹)`, the inner product on p-forms.
    pub fn form_metric(&self, p: usize) -> QMat {
        self.ginv.exterior_power(p)
    }

    pub fn hodge_star(&self, psi: &InvariantForm) -> InvariantForm {
        let p = psi.degree;
        let gp = self.form_metric(p).apply(&psi.coeffs);
        let mut out = InvariantForm::zero(DIM - p);
        for (i, &m) in basis(p).iter().enumerate() {
            let comp = 0b1111 ^ m;
            out.coeffs[position(comp)] = sign_q(wedge_sign(m, comp)) * &self.vol * &gp[i];
        }
        out
    }

    pub fn hodge_matrix(&self, p: usize) -> QMat {
        let n = n_components(p);
        let mut m = QMat::zeros(n_components(DIM - p), n);
        for c in 0..n {
            let mut e = InvariantForm::zero(p);
            e.coeffs[c] = Q::one();
            for (r, v) in self.hodge_star(&e).coeffs.into_iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    /// J on p-forms, `(−1)^p` times the pullback by J.
    pub fn j_forms(&self, p: usize) -> QMat {
        let pull = self.j.exterior_power(p).transpose();
        if p % 2 == 1 {
            pull.scale(&-Q::one())
        } else {
            pull
        }
    }

    /// Adjoint of d in the invariant inner product, `G_{p−1}⁻¹ dᵀ G_p`.
    pub fn codifferential_matrix(&self, p: usize) -> Result<QMat> {
        let d = self.algebra.d_matrix(p - 1)?;
        let lower = self.form_metric(p - 1).inverse().expect("positive definite");
        Ok(lower.mul(&d.transpose()).mul(&self.form_metric(p)))
    }

    /// `−∗d∗`, which must agree with the adjoint on a unimodular algebra.
    pub fn star_codifferential_matrix(&self, p: usize) -> Result<QMat> {
        let m = self.hodge_matrix(DIM - p + 1).mul(&self.algebra.d_matrix(DIM - p)?).mul(&self.hodge_matrix(p));
        Ok(m.scale(&-Q::one()))
    }

    pub fn laplacian_matrix(&self, p: usize) -> Result<QMat> {
        let n = n_components(p);
        let mut out = QMat::zeros(n, n);
        if p < DIM {
            out = out.add(&self.codifferential_matrix(p + 1)?.mul(&self.algebra.d_matrix(p)?));
        }
        if p > 0 {
            out = out.add(&self.algebra.d_matrix(p - 1)?.mul(&self.codifferential_matrix(p)?));
        }
        Ok(out)
    }
}

/// Exact curvature data of an invariant structure.
#[derive(Debug, Clone)]
pub struct InvariantCurvature {
    /// `(Γ_i)^k_j = Γ^k_{ij}`, `∇_{e_i} e_j = Γ^k_{ij} e_k`.
    pub levi_civita: [QMat; 4],
    /// `D^g_{e_i} J`.
    pub dj: [QMat; 4],
    pub hermitian: [QMat; 4],
    pub ricci: InvariantForm,
    pub scalar: Q,
    /// Ricci form by the trace route `θ_i = tr(J H_i)`.
    pub ricci_trace_route: InvariantForm,
}

impl InvariantCurvature {
    pub fn correction_nonzero(&self) -> bool {
        self.dj.iter().any(|m| !m.is_zero())
    }

    pub fn is_heak(&self, st: &InvariantStructure) -> bool {
        self.ricci == st.omega.scale(&(&self.scalar / q(4)))
    }
}

pub fn invariant_curvature(st: &InvariantStructure) -> Result<InvariantCurvature> {
    let c = st.algebra.structure_constants();
    let g = &st.g;
    // c_{ijl} = g([e_i, e_j], e_l)
    let lower = |i: usize, j: usize, l: usize| (0..4).fold(Q::zero(), |s, m| s + &c[m][i][j] * g.at(m, l));
    let half = Q::new(BigInt::from(1), BigInt::from(2));
    let levi_civita: [QMat; 4] = std::array::from_fn(|i| {
        let mut m = QMat::zeros(4, 4);
        for k in 0..4 {
            for j in 0..4 {
                let v = (0..4).fold(Q::zero(), |s, l| {
                    s + st.ginv.at(k, l) * (lower(i, j, l) - lower(j, l, i) + lower(l, i, j))
                });
                m.set(k, j, &half * v);
            }
        }
        m
    });
    let dj: [QMat; 4] = std::array::from_fn(|i| levi_civita[i].commutator(&st.j));
    let hermitian: [QMat; 4] = std::array::from_fn(|i| levi_civita[i].sub(&st.j.mul(&dj[i]).scale(&half)));
    let curv = |a: usize, b: usize| -> QMat {
        let mut r = hermitian[a].commutator(&hermitian[b]);
        for (k, h) in hermitian.iter().enumerate() {
            if !c[k][a][b].is_zero() {
                r = r.sub(&h.scale(&c[k][a][b]));
            }
        }
        r
    };
    let mut ricci = InvariantForm::zero(2);
    let mut ricci_trace_route = InvariantForm::zero(2);
    let theta: Vec<Q> = (0..4).map(|i| st.j.mul(&hermitian[i]).trace()).collect();
    for (k, &mask) in basis(2).iter().enumerate() {
        let a = mask.trailing_zeros() as usize;
        let b = 7 - mask.leading_zeros() as usize;
        ricci.coeffs[k] = &half * st.j.mul(&curv(a, b)).trace();
        // dθ(e_a, e_b) = −θ([e_a, e_b]) for invariant θ; the ∂J terms vanish for invariant J
        let dtheta = -(0..4).fold(Q::zero(), |s, m| s + &c[m][a][b] * &theta[m]);
        let comm = st.j.mul(&hermitian[a].commutator(&hermitian[b])).trace();
        ricci_trace_route.coeffs[k] = &half * (dtheta + comm);
    }
    let rw = ricci.wedge(&st.omega)?;
    let scalar = q(2) * &rw.coeffs[0] / &st.vol;
    Ok(InvariantCurvature { levi_civita, dj, hermitian, ricci, scalar, ricci_trace_route })
}

/// Dimensions of invariant harmonic 2-forms split by self-duality and J-type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonicCounts {
    pub b2: usize,
    pub b_plus: usize,
    pub b_minus: usize,
    pub h_minus: usize,
    pub h_plus: usize,
    pub omega_harmonic_self_dual: bool,
}

pub fn harmonic_counts(st: &InvariantStructure) -> Result<HarmonicCounts> {
    let lap = st.laplacian_matrix(2)?;
    let star = st.hodge_matrix(2);
    let id = QMat::identity(6);
    let jf = st.j_forms(2);
    let nullity = |m: QMat| m.cols - m.rank();
    let b2 = nullity(lap.clone());
    let b_plus = nullity(lap.stack(&star.sub(&id)));
    let b_minus = nullity(lap.stack(&star.add(&id)));
    let h_minus = nullity(lap.stack(&jf.add(&id)));
    let h_plus = nullity(lap.stack(&jf.sub(&id)));
    let omega_harmonic_self_dual =
        lap.apply(&st.omega.coeffs).iter().all(Zero::is_zero) && st.hodge_star(&st.omega) == st.omega;
    Ok(HarmonicCounts { b2, b_plus, b_minus, h_minus, h_plus, omega_harmonic_self_dual })
}

pub fn betti_numbers(alg: &InvariantAlgebra) -> Result<[usize; 5]> {
    let mut out = [0; 5];
    for (p, o) in out.iter_mut().enumerate() {
        let kernel = if p < DIM { n_components(p) - alg.d_matrix(p)?.rank() } else { 1 };
        let image = if p > 0 { alg.d_matrix(p - 1)?.rank() } else { 0 };
        *o = kernel - image;
    }
    Ok(out)
}

/// Human- and machine-readable certificate for the Kodaira–Thurston example.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KtCertificate {
    pub coframe: Vec<String>,
    pub structure_equations: Vec<String>,
    pub orientation: String,
    pub omega: String,
    pub j_action: Vec<String>,
    pub d_squared_zero: bool,
    pub omega_closed: bool,
    pub codifferential_consistent: bool,
    pub levi_civita_nonzero: Vec<String>,
    pub correction_nonzero: bool,
    pub ricci_form: String,
    pub ricci_form_trace_route: String,
    pub scalar_curvature: String,
    pub heak: bool,
    pub betti: [usize; 5],
    pub counts: HarmonicCounts,
    pub anti_invariant_harmonic: Vec<String>,
    pub passed: bool,
}

fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn format_form(names: &[String; 4], psi: &InvariantForm) -> String {
    let terms: Vec<String> = basis(psi.degree)
        .iter()
        .zip(&psi.coeffs)
        .filter(|(_, c)| !c.is_zero())
        .map(|(&m, c)| {
            let mono: Vec<&str> = (0..DIM).filter(|a| m & (1 << a) != 0).map(|a| names[a].as_str()).collect();
            let mono = if mono.is_empty() { "1".to_string() } else { mono.join("∧") };
            if c.is_one() {
                mono
            } else if (-c).is_one() {
                format!("−{mono}")
            } else {
                format!("{}·{mono}", fmt_q(c))
            }
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ").replace("+ −", "− ")
    }
}

pub fn kt_certificate() -> Result<KtCertificate> {
    let st = InvariantStructure::kodaira_thurston();
    let alg = &st.algebra;
    let names = &alg.names;
    let mut d_squared_zero = true;
    for p in 0..=2 {
        d_squared_zero &= alg.d_matrix(p + 1)?.mul(&alg.d_matrix(p)?).is_zero();
    }
    let mut codifferential_consistent = true;
    for p in 1..=4 {
        codifferential_consistent &= st.codifferential_matrix(p)? == st.star_codifferential_matrix(p)?;
    }
    let curv = invariant_curvature(&st)?;
    let counts = harmonic_counts(&st)?;
    let lap = st.laplacian_matrix(2)?;
    let anti = lap.stack(&st.j_forms(2).add(&QMat::identity(6))).null_space();
    let mut levi_civita_nonzero = Vec::new();
    for (i, m) in curv.levi_civita.iter().enumerate() {
        for k in 0..4 {
            for j in 0..4 {
                let v = m.at(k, j);
                if !v.is_zero() {
                    levi_civita_nonzero.push(format!("Γ^{}_{{{}{}}} = {}", names[k], names[i], names[j], fmt_q(v)));
                }
            }
        }
    }
    let structure_equations =
        (0..4).map(|k| format!("d{} = {}", names[k], format_form(names, &alg.structure[k]))).collect();
    let heak = curv.is_heak(&st);
    let passed = d_squared_zero
        && codifferential_consistent
        && curv.ricci.is_zero()
        && curv.ricci_trace_route.is_zero()
        && curv.scalar.is_zero()
        && curv.correction_nonzero()
        && heak
        && counts.b2 == 4
        && counts.b_plus == 2
        && counts.h_minus == 1
        && counts.omega_harmonic_self_dual;
    Ok(KtCertificate {
        coframe: names.to_vec(),
        structure_equations,
        orientation: format!(
            "ω²/2 = {}; in the order (dt, dx, dy, γ) this is −dt∧dx∧dy∧γ",
            format_form(names, &InvariantForm::new(4, vec![st.vol.clone()])?)
        ),
        omega: format_form(names, &st.omega),
        j_action: (0..4)
            .map(|k| {
                let e = InvariantForm::coframe(k);
                let je = InvariantForm::new(1, st.j_forms(1).apply(&e.coeffs)).expect("1-form");
                format!("J {} = {}", names[k], format_form(names, &je))
            })
            .collect(),
        d_squared_zero,
        omega_closed: alg.d(&st.omega)?.is_zero(),
        codifferential_consistent,
        levi_civita_nonzero,
        correction_nonzero: curv.correction_nonzero(),
        ricci_form: format_form(names, &curv.ricci),
        ricci_form_trace_route: format_form(names, &curv.ricci_trace_route),
        scalar_curvature: fmt_q(&curv.scalar),
        heak,
        betti: betti_numbers(alg)?,
        counts,
        anti_invariant_harmonic: anti
            .into_iter()
            .map(|v| format_form(names, &InvariantForm::new(2, v).expect("2-form")))
            .collect(),
        passed,
    })
}

impl fmt::Display for KtCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Kodaira–Thurston invariant certificate")?;
        writeln!(f, "coframe: {}", self.coframe.join(", "))?;
        for s in &self.structure_equations {
            writeln!(f, "  {s}")?;
        }
        writeln!(f, "orientation: {}", self.orientation)?;
        writeln!(f, "ω = {}", self.omega)?;
        for s in &self.j_action {
            writeln!(f, "  {s}")?;
        }
        writeln!(f, "d² = 0: {}   dω = 0: {}   δ = −∗d∗: {}", self.d_squared_zero, self.omega_closed, self.codifferential_consistent)?;
        writeln!(f, "Levi-Civita symbols (nonzero):")?;
        for s in &self.levi_civita_nonzero {
            writeln!(f, "  {s}")?;
        }
        writeln!(f, "D^g J ≠ 0: {}", self.correction_nonzero)?;
        writeln!(f, "ρ^∇ = {}   (trace route: {})", self.ricci_form, self.ricci_form_trace_route)?;
        writeln!(f, "s^∇ = {}   HEAK: {}", self.scalar_curvature, self.heak)?;
        writeln!(f, "Betti numbers of the invariant complex: {:?}", self.betti)?;
        let c = &self.counts;
        writeln!(f, "harmonic 2-forms: b₂ = {}, b⁺ = {}, b⁻ = {}, h⁻_J = {}, h⁺_J = {}", c.b2, c.b_plus, c.b_minus, c.h_minus, c.h_plus)?;
        writeln!(f, "anti-invariant harmonic: {}", self.anti_invariant_harmonic.join("; "))?;
        write!(f, "h⁻_J = b⁺ − 1: {}   certificate: {}", c.h_minus + 1 == c.b_plus, if self.passed { "PASS" } else { "FAIL" })
    }
}
