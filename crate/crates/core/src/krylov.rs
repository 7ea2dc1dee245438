//! Preconditioned conjugate gradients and restarted GMRES on flat vectors.

use crate::error::{Error, Result};
use crate::grid::pairwise_sum_by;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final residual relative to the right-hand side.
    pub residual: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum_by(a.len(), &|i| a[i] * b[i])
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

/// Solve `A x = b` for symmetric positive (semi)definite `A` with SPD preconditioner `M⁻¹`.
///
/// `b` must lie in the range of `A` when `A` is singular.
/// PCG gives up once the residual has not halved for this many iterations.
pub const STALL_WINDOW: usize = 200;

pub fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, KrylovStats)> {
    let bnorm = norm(b);
    let mut x = vec![0.0; b.len()];
    if bnorm == 0.0 {
        return Ok((x, KrylovStats { iterations: 0, residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    let mut best = (1.0, 0);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Convergence { iterations: it, residual: rel });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok((x, KrylovStats { iterations: it, residual: rel }));
        }
        if rel < 0.5 * best.0 {
            best = (rel, it);
        } else if it - best.1 > STALL_WINDOW {
            return Err(Error::Convergence { iterations: it, residual: best.0 });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::Convergence { iterations: max_iter, residual: rel })
}

/// Restarted GMRES for a general operator; any preconditioning is folded into `apply` and `b`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<(Vec<f64>, KrylovStats)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], KrylovStats { iterations: 0, residual: 0.0 }));
    }
    let mut total = 0;
    let mut rel;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= tol {
            return Ok((x, KrylovStats { iterations: total, residual: rel }));
        }
        if total >= max_iter {
            return Err(Error::Convergence { iterations: total, residual: rel });
        }
        let m = restart.min(max_iter - total).max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|u| u / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut s = vec![0.0; m + 1];
        s[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = apply(&v[k]);
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                axpy(&mut w, -h[i][k], vi);
            }
            // second Gram-Schmidt pass for stability
            for (i, vi) in v.iter().enumerate() {
                let c = dot(&w, vi);
                h[i][k] += c;
                axpy(&mut w, -c, vi);
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = if d == 0.0 { 1.0 } else { h[k][k] / d };
            sn[k] = if d == 0.0 { 0.0 } else { h[k + 1][k] / d };
            h[k][k] = d;
            s[k + 1] = -sn[k] * s[k];
            s[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            let wn = norm(&w);
            if s[k + 1].abs() / bnorm <= tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|u| u / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = s[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(&mut x, *yj, &v[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], shift: f64) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                (2.0 + shift) * x[i] - l - r
            })
            .collect()
    }

    #[test]
    fn pcg_solves_spd_system() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let (x, st) = pcg(|v| tridiag(v, 0.1), |v| v.to_vec(), &b, 1e-12, 500).unwrap();
        let r = tridiag(&x, 0.1);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-10));
        assert!(st.iterations <= 50);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let op = |v: &[f64]| {
            let mut out = tridiag(v, 0.5);
            for i in 1..v.len() {
                out[i] += 0.3 * v[i - 1];
            }
            out
        };
        let b: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 * 0.01).collect();
        let (x, _) = gmres(op, &b, None, 1e-12, 400, 15).unwrap();
        let r = op(&x);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-9));
    }
}
