//! Seeded band-limited random fields for tests and probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::fft::Spectral;
use crate::forms::{n_components, FormField, ScalarField};
use crate::grid::GridSpec;

/// Default cutoff: modes with `|m_a| > max(1, floor(n_a / 4))` on any axis are removed.
///
/// Products with smooth but non-band-limited structure fields then stay well
/// clear of the Nyquist plane.
pub fn default_cutoff(grid: &GridSpec) -> [usize; 4] {
    std::array::from_fn(|a| (grid.resolution[a] / 4).max(1))
}

/// Generator of random smooth fields with a fixed spectral cutoff.
pub struct FieldSampler<'a> {
    spectral: &'a Spectral,
    cutoff: [usize; 4],
    rng: ChaCha8Rng,
}

impl<'a> FieldSampler<'a> {
    pub fn new(spectral: &'a Spectral, seed: u64) -> Self {
        let cutoff = default_cutoff(spectral.grid());
        Self::with_cutoff(spectral, seed, cutoff)
    }

    pub fn with_cutoff(spectral: &'a Spectral, seed: u64, cutoff: [usize; 4]) -> Self {
        Self { spectral, cutoff, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn in_band(&self, i: usize) -> bool {
        let grid = self.spectral.grid();
        let m = grid.multi_index(i);
        (0..4).all(|a| {
            let n = grid.resolution[a];
            let k = GridSpec::frequency(m[a], n).unsigned_abs() as usize;
            k <= self.cutoff[a] && m[a] != n / 2
        })
    }

    /// Random real field with unit RMS, optionally without its mean.
    pub fn values(&mut self, zero_mean: bool) -> Vec<f64> {
        let grid = *self.spectral.grid();
        let noise: Vec<f64> = (0..grid.len()).map(|_| self.rng.gen_range(-1.0..1.0)).collect();
        let mut spec = self.spectral.spectra(&[&noise]).pop().unwrap();
        for (i, z) in spec.iter_mut().enumerate() {
            if !self.in_band(i) || (zero_mean && i == 0) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        let mut out = self.spectral.synthesize(&[spec]).pop().unwrap();
        let rms = (out.iter().map(|v| v * v).sum::<f64>() / out.len() as f64).sqrt();
        if rms > 0.0 {
            out.iter_mut().for_each(|v| *v /= rms);
        }
        out
    }

    pub fn scalar(&mut self) -> ScalarField {
        ScalarField { grid: *self.spectral.grid(), values: self.values(false) }
    }

    /// Flat-mean-free scalar field.
    pub fn scalar_zero_mean(&mut self) -> ScalarField {
        ScalarField { grid: *self.spectral.grid(), values: self.values(true) }
    }

    pub fn form(&mut self, degree: usize) -> FormField {
        let comps = (0..n_components(degree)).map(|_| self.values(false)).collect();
        FormField { grid: *self.spectral.grid(), degree, comps }
    }
}
