//! Periodic lattice on the flat 4-torus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor-product lattice with periodic identification on every axis.
///
/// Point `(i0, i1, i2, i3)` has linear index `((i0 * n1 + i1) * n2 + i2) * n3 + i3`
/// and coordinates `x_a = i_a * L_a / n_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: [usize; 4],
    pub period: [f64; 4],
}

impl GridSpec {
    pub fn new(resolution: [usize; 4], period: [f64; 4]) -> Result<Self> {
        for (axis, &n) in resolution.iter().enumerate() {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: resolution {n} must be even and at least 4"
                )));
            }
        }
        for (axis, &l) in period.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("axis {axis}: period {l} must be positive")));
            }
        }
        Ok(Self { resolution, period })
    }

    /// Same resolution on every axis, unit periods.
    pub fn cubic(n: usize) -> Result<Self> {
        Self::new([n; 4], [1.0; 4])
    }

    /// Per-axis resolution, unit periods.
    pub fn with_resolution(resolution: [usize; 4]) -> Result<Self> {
        Self::new(resolution, [1.0; 4])
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lattice cell volume, the quadrature weight of every point.
    pub fn cell_volume(&self) -> f64 {
        (0..4).map(|a| self.period[a] / self.resolution[a] as f64).product()
    }

    /// Flat coordinate volume of the torus.
    pub fn volume(&self) -> f64 {
        self.period.iter().product()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 4] {
        let mut out = [0; 4];
        for a in (0..4).rev() {
            out[a] = idx % self.resolution[a];
            idx /= self.resolution[a];
        }
        out
    }

    pub fn linear_index(&self, m: [usize; 4]) -> usize {
        let n = self.resolution;
        ((m[0] * n[1] + m[1]) * n[2] + m[2]) * n[3] + m[3]
    }

    pub fn coords(&self, idx: usize) -> [f64; 4] {
        let m = self.multi_index(idx);
        let mut x = [0.0; 4];
        for a in 0..4 {
            x[a] = m[a] as f64 * self.period[a] / self.resolution[a] as f64;
        }
        x
    }

    /// Iterator over the coordinates of all lattice points in storage order.
    pub fn points(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        (0..self.len()).map(move |i| self.coords(i))
    }

    /// Signed integer frequency of storage slot `j` along an axis of length `n`.
    pub fn frequency(j: usize, n: usize) -> i64 {
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Parse `"16"` (all axes) or `"32,4,32,4"` (per axis).
pub fn parse_resolution(text: &str) -> Result<[usize; 4]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Config(format!("bad resolution entry '{s}'")))
    };
    match parts.len() {
        1 => Ok([parse(parts[0])?; 4]),
        4 => Ok([parse(parts[0])?, parse(parts[1])?, parse(parts[2])?, parse(parts[3])?]),
        _ => Err(Error::Config(format!("resolution '{text}' needs 1 or 4 entries"))),
    }
}

/// Pairwise summation. The recursion shape depends only on the length, so
/// repeated runs over the same data are bit-identical.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without materializing the terms.
pub fn pairwise_sum_by(n: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn rec(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= 64 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            return s;
        }
        let mid = lo + (hi - lo) / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    rec(0, n, f)
}
