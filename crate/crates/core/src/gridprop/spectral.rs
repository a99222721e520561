//! 2D FFT built from row transforms and a blocked transpose.
//!
//! Wavenumber space is kept in transposed layout (`[kx][ky]`, `ky` fastest),
//! so a forward/inverse pair costs two transposes in total.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;
use crate::fields::PhysicalUnits;

const BLOCK: usize = 16;

pub struct SpectralPlan {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

fn rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
    let scratch_len = fft.get_inplace_scratch_len();
    data.par_chunks_mut(n * BLOCK.min(data.len() / n)).for_each_init(
        || vec![Complex64::new(0.0, 0.0); scratch_len],
        |scratch, chunk| fft.process_with_scratch(chunk, scratch),
    );
}

/// `dst[c·r + i] = src[i·c + c_idx]` for a `r × c` source.
fn transpose(src: &[Complex64], dst: &mut [Complex64], r: usize, c: usize) {
    let b = BLOCK.min(c);
    dst.par_chunks_mut(r * b).enumerate().for_each(|(blk, out)| {
        let c0 = blk * b;
        for i in 0..r {
            let row = &src[i * c + c0..i * c + c0 + b];
            for (k, v) in row.iter().enumerate() {
                out[k * r + i] = *v;
            }
        }
    });
}

impl SpectralPlan {
    pub fn new(spec: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx: spec.nx,
            ny: spec.ny,
            fwd_x: planner.plan_fft_forward(spec.nx),
            inv_x: planner.plan_fft_inverse(spec.nx),
            fwd_y: planner.plan_fft_forward(spec.ny),
            inv_y: planner.plan_fft_inverse(spec.ny),
        }
    }

    /// Unnormalised forward transform of `data` (row-major, modified in
    /// place as scratch) into `spectrum` (transposed layout).
    pub fn forward(&self, data: &mut [Complex64], spectrum: &mut [Complex64]) {
        rows(&self.fwd_x, data, self.nx);
        transpose(data, spectrum, self.ny, self.nx);
        rows(&self.fwd_y, spectrum, self.ny);
    }

    /// Unnormalised inverse of [`SpectralPlan::forward`]; `spectrum` is
    /// consumed as scratch.
    pub fn inverse(&self, spectrum: &mut [Complex64], data: &mut [Complex64]) {
        rows(&self.inv_y, spectrum, self.ny);
        transpose(spectrum, data, self.nx, self.ny);
        rows(&self.inv_x, data, self.nx);
    }

    /// Free-evolution multiplier `exp(−iħk²dt/2m)/(nx·ny)` in transposed
    /// layout; the factor undoes the unnormalised transform pair.
    pub fn kinetic_phase(spec: &GridSpec, units: &PhysicalUnits, dt: f64) -> Vec<Complex64> {
        let lx = spec.x_max - spec.x_min;
        let ly = spec.y_max - spec.y_min;
        let scale = 1.0 / (spec.nx * spec.ny) as f64;
        let ky2: Vec<f64> = (0..spec.ny)
            .map(|j| GridSpec::wavenumber(j, spec.ny, ly).powi(2))
            .collect();
        let c = units.hbar * dt / (2.0 * units.mass);
        let mut out = Vec::with_capacity(spec.len());
        for i in 0..spec.nx {
            let kx2 = GridSpec::wavenumber(i, spec.nx, lx).powi(2);
            for k2 in &ky2 {
                out.push(Complex64::from_polar(scale, -c * (kx2 + k2)));
            }
        }
        out
    }
}
