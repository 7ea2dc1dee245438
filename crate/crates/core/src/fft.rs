//! Four-dimensional FFTs on the lattice.
//!
//! Real fields are transformed two at a time packed as `a + i·b`. Every
//! multiplier used by the calculus (derivatives with the Nyquist slot
//! zeroed, inverse Laplacian symbols) is Hermitian, so packed synthesis
//! recovers both real outputs exactly.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

pub struct Spectral {
    grid: GridSpec,
    forward: [Arc<dyn Fft<f64>>; 4],
    inverse: [Arc<dyn Fft<f64>>; 4],
    /// Wavevector per storage slot.
    kvec: Vec<[f64; 4]>,
    /// Linear index of the mode `-k`.
    negated: Vec<u32>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = std::array::from_fn(|a| planner.plan_fft_forward(grid.resolution[a]));
        let inverse = std::array::from_fn(|a| planner.plan_fft_inverse(grid.resolution[a]));
        let wavenumber: [Vec<f64>; 4] = std::array::from_fn(|a| {
            let n = grid.resolution[a];
            (0..n)
                .map(|j| {
                    if j == n / 2 {
                        0.0
                    } else {
                        2.0 * std::f64::consts::PI * GridSpec::frequency(j, n) as f64 / grid.period[a]
                    }
                })
                .collect()
        });
        let negated = (0..grid.len())
            .map(|i| {
                let m = grid.multi_index(i);
                let mut neg = [0; 4];
                for a in 0..4 {
                    let n = grid.resolution[a];
                    neg[a] = (n - m[a]) % n;
                }
                grid.linear_index(neg) as u32
            })
            .collect();
        let kvec = (0..grid.len())
            .map(|i| {
                let m = grid.multi_index(i);
                std::array::from_fn(|a| wavenumber[a][m[a]])
            })
            .collect();
        Self { grid, forward, inverse, kvec, negated }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Derivative wavenumbers `(k_0, .., k_3)` of the mode stored at linear index `i`.
    #[inline]
    pub fn wavevector(&self, i: usize) -> [f64; 4] {
        self.kvec[i]
    }

    /// Largest derivative wavenumber over all axes.
    pub fn max_wavenumber(&self) -> f64 {
        (0..4)
            .map(|a| std::f64::consts::PI * (self.grid.resolution[a] as f64 - 2.0) / self.grid.period[a])
            .fold(0.0, f64::max)
    }

    /// True for modes whose every frequency is 0 or Nyquist; spectral
    /// differentiation annihilates these.
    pub fn is_corner_mode(&self, i: usize) -> bool {
        let m = self.grid.multi_index(i);
        (0..4).all(|a| m[a] == 0 || m[a] == self.grid.resolution[a] / 2)
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid.resolution;
        let plans = if inverse { &self.inverse } else { &self.forward };
        for axis in 0..4 {
            let stride: usize = n[axis + 1..].iter().product();
            let len = n[axis];
            let block = len * stride;
            let plan = &plans[axis];
            if stride == 1 {
                data.par_chunks_mut(block * 64).for_each(|chunk| plan.process(chunk));
                continue;
            }
            data.par_chunks_mut(block).for_each(|chunk| {
                let mut lines = vec![Complex64::new(0.0, 0.0); block];
                for j in 0..stride {
                    for k in 0..len {
                        lines[j * len + k] = chunk[k * stride + j];
                    }
                }
                plan.process(&mut lines);
                for j in 0..stride {
                    for k in 0..len {
                        chunk[k * stride + j] = lines[j * len + k];
                    }
                }
            });
        }
        if inverse {
            let s = 1.0 / self.grid.len() as f64;
            data.iter_mut().for_each(|z| *z *= s);
        }
    }

    /// Spectra of real fields.
    pub fn spectra(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let mut z: Vec<Complex64> = match pair {
                [a, b] => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
                [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                _ => unreachable!(),
            };
            self.transform(&mut z, false);
            if pair.len() == 1 {
                out.push(z);
                continue;
            }
            let mut sa = vec![Complex64::new(0.0, 0.0); z.len()];
            let mut sb = vec![Complex64::new(0.0, 0.0); z.len()];
            for i in 0..z.len() {
                let zc = z[self.negated[i] as usize].conj();
                sa[i] = (z[i] + zc) * 0.5;
                // (z - zc) / (2i)
                let d = (z[i] - zc) * 0.5;
                sb[i] = Complex64::new(d.im, -d.re);
            }
            out.push(sa);
            out.push(sb);
        }
        out
    }

    /// Real fields from Hermitian spectra.
    pub fn synthesize(&self, spectra: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(spectra.len());
        for pair in spectra.chunks(2) {
            let mut z: Vec<Complex64> = match pair {
                [a, b] => a.iter().zip(b.iter()).map(|(x, y)| x + Complex64::new(-y.im, y.re)).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            };
            self.transform(&mut z, true);
            out.push(z.iter().map(|c| c.re).collect());
            if pair.len() == 2 {
                out.push(z.iter().map(|c| c.im).collect());
            }
        }
        out
    }

    /// All four partial derivatives of each field.
    pub fn gradients(&self, fields: &[&[f64]]) -> Vec<[Vec<f64>; 4]> {
        let spec = self.spectra(fields);
        let mut requests = Vec::with_capacity(spec.len() * 4);
        for s in &spec {
            for a in 0..4 {
                requests.push(self.differentiate(s, a));
            }
        }
        let mut real = self.synthesize(&requests).into_iter();
        spec.iter()
            .map(|_| std::array::from_fn(|_| real.next().unwrap()))
            .collect()
    }

    /// Multiply a spectrum by `i k_axis`.
    pub fn differentiate(&self, spectrum: &[Complex64], axis: usize) -> Vec<Complex64> {
        spectrum
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k = self.kvec[i][axis];
                Complex64::new(-k * z.im, k * z.re)
            })
            .collect()
    }

    /// True for modes carrying the Nyquist frequency on some axis.
    pub fn is_nyquist_mode(&self, i: usize) -> bool {
        let m = self.grid.multi_index(i);
        (0..4).any(|a| m[a] == self.grid.resolution[a] / 2)
    }

    /// Projection of concatenated fields onto the modes without Nyquist content.
    pub fn band_limit(&self, x: &[f64]) -> Vec<f64> {
        let refs: Vec<&[f64]> = x.chunks(self.grid.len()).collect();
        self.apply_symbol(&refs, |i, _| if self.is_nyquist_mode(i) { 0.0 } else { 1.0 }).concat()
    }

    /// Apply a real, even Fourier multiplier to each field.
    pub fn apply_symbol(&self, fields: &[&[f64]], symbol: impl Fn(usize, [f64; 4]) -> f64) -> Vec<Vec<f64>> {
        let table: Vec<f64> = (0..self.grid.len()).map(|i| symbol(i, self.wavevector(i))).collect();
        let spec: Vec<Vec<Complex64>> = self
            .spectra(fields)
            .into_iter()
            .map(|s| s.iter().zip(&table).map(|(z, t)| z * *t).collect())
            .collect();
        self.synthesize(&spec)
    }

    /// Largest coefficient magnitude among modes with some |m_a| > n_a/4,
    /// relative to the largest coefficient, jointly over all given fields.
    pub fn top_mode_ratio(&self, fields: &[&[f64]]) -> f64 {
        let mut top = 0.0f64;
        let mut all = 0.0f64;
        for spec in self.spectra(fields) {
            for (i, z) in spec.iter().enumerate() {
                let m = self.grid.multi_index(i);
                let high = (0..4).any(|a| {
                    let n = self.grid.resolution[a];
                    GridSpec::frequency(m[a], n).unsigned_abs() as usize > n / 4
                });
                let a = z.norm();
                all = all.max(a);
                if high {
                    top = top.max(a);
                }
            }
        }
        if all == 0.0 {
            0.0
        } else {
            top / all
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_single_mode_is_exact() {
        let g = GridSpec::with_resolution([8, 4, 16, 4]).unwrap();
        let sp = Spectral::new(g);
        let f: Vec<f64> = g.points().map(|x| (2.0 * PI * 3.0 * x[2]).sin() * (2.0 * PI * x[0]).cos()).collect();
        let h: Vec<f64> = g.points().map(|x| (2.0 * PI * x[3]).cos()).collect();
        let grads = sp.gradients(&[&f, &h]);
        for (i, x) in g.points().enumerate() {
            let d2 = 6.0 * PI * (6.0 * PI * x[2]).cos() * (2.0 * PI * x[0]).cos();
            let d0 = -2.0 * PI * (6.0 * PI * x[2]).sin() * (2.0 * PI * x[0]).sin();
            let h3 = -2.0 * PI * (2.0 * PI * x[3]).sin();
            assert!((grads[0][2][i] - d2).abs() < 1e-11);
            assert!((grads[0][0][i] - d0).abs() < 1e-11);
            assert!(grads[0][1][i].abs() < 1e-11);
            assert!((grads[1][3][i] - h3).abs() < 1e-11);
        }
    }

    #[test]
    fn packed_round_trip() {
        let g = GridSpec::with_resolution([4, 6, 4, 8]).unwrap();
        let sp = Spectral::new(g);
        let a: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| ((i * 104729) % 17) as f64 * 0.5).collect();
        let c: Vec<f64> = (0..g.len()).map(|i| (i as f64).sqrt()).collect();
        let back = sp.synthesize(&sp.spectra(&[&a, &b, &c]));
        for (orig, new) in [&a, &b, &c].iter().zip(&back) {
            for (x, y) in orig.iter().zip(new) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
