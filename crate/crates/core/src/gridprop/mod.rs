//! 2D time-dependent Schrödinger propagation with the split-operator method.
//!
//! Fields live on a uniform periodic grid. Potentials are piecewise constant
//! in time: a [`PotentialSchedule`] holds stages, each a static composition of
//! rotated rectangles. Trajectories are advanced alongside the field with RK4
//! against velocities sampled from the wave function at the step ends.

mod interp;
mod potential;
mod propagate;
mod snapshot;
mod spectral;
mod velocity;

use num_complex::Complex64;
use thiserror::Error;

use crate::analytic::GaussianPacket;
use crate::fields::PhysicalUnits;

pub use interp::{HermiteField, InterpolatedSampler, StepInterpolator};
pub use potential::{
    exact_cos_sin, rasterize_potential, ElementKind, PotentialElement, PotentialSchedule,
    PotentialStage,
};
pub use propagate::{
    propagate, split_step, Propagator, ScheduledRun, Snapshot, StabilityWarning,
};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotMeta};
pub use spectral::SpectralPlan;
pub use velocity::{
    grid_velocity_field, synchronized_trajectories, GridVelocityField, TrajectoryStepper,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("array of length {got} does not match the {nx}x{ny} grid")]
    ShapeMismatch { nx: usize, ny: usize, got: usize },
    #[error("no potential stage covers t = {t}")]
    ScheduleGap { t: f64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid propagation request: {0}")]
    InvalidRequest(String),
    #[error("non-finite amplitude after step at t = {t}")]
    NonFinite { t: f64 },
}

/// Uniform periodic grid. Point `(ix, iy)` sits at
/// `(x_min + ix·dx, y_min + iy·dy)`; the upper edges are identified with the
/// lower ones.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self, GridError> {
        let spec = Self {
            nx,
            ny,
            x_min: x.0,
            x_max: x.1,
            y_min: y.0,
            y_max: y.1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Square `n × n` grid over `[lo, hi]²`; the x and y axes coincide exactly.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self, GridError> {
        Self::new(n, n, (lo, hi), (lo, hi))
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny)] {
            if n < 64 || !n.is_power_of_two() {
                return Err(GridError::InvalidGrid(format!(
                    "{name} = {n} must be a power of two and at least 64"
                )));
            }
        }
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(GridError::InvalidGrid("extent must be a non-degenerate rectangle".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y_min + iy as f64 * self.dy()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Angular wavenumber of FFT bin `i` out of `n` on a period `length`.
    pub fn wavenumber(i: usize, n: usize, length: f64) -> f64 {
        let signed = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * std::f64::consts::PI * signed / length
    }

    pub fn contains(&self, p: &[f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] < self.x_max && p[1] >= self.y_min && p[1] < self.y_max
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<(), GridError> {
        if got != self.len() {
            return Err(GridError::ShapeMismatch {
                nx: self.nx,
                ny: self.ny,
                got,
            });
        }
        Ok(())
    }
}

/// Complex amplitudes on a [`GridSpec`], row-major (`amplitudes[iy·nx + ix]`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridWaveField {
    pub spec: GridSpec,
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
    pub units: PhysicalUnits,
}

impl GridWaveField {
    pub fn new(
        spec: GridSpec,
        amplitudes: Vec<Complex64>,
        time: f64,
        units: PhysicalUnits,
    ) -> Result<Self, GridError> {
        spec.validate()?;
        spec.check_len(amplitudes.len())?;
        Ok(Self {
            spec,
            amplitudes,
            time,
            units,
        })
    }

    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(
        spec: GridSpec,
        units: PhysicalUnits,
        time: f64,
        f: F,
    ) -> Result<Self, GridError> {
        spec.validate()?;
        let mut amplitudes = Vec::with_capacity(spec.len());
        for iy in 0..spec.ny {
            let y = spec.y(iy);
            for ix in 0..spec.nx {
                amplitudes.push(f(spec.x(ix), y));
            }
        }
        Self::new(spec, amplitudes, time, units)
    }

    /// Product of two free 1D packets evaluated at time `t`.
    pub fn product_gaussian(
        spec: GridSpec,
        units: PhysicalUnits,
        px: &GaussianPacket,
        py: &GaussianPacket,
        t: f64,
    ) -> Result<Self, GridError> {
        let gx: Vec<Complex64> = (0..spec.nx).map(|i| px.amplitude(spec.x(i), t, &units)).collect();
        let gy: Vec<Complex64> = (0..spec.ny).map(|j| py.amplitude(spec.y(j), t, &units)).collect();
        let mut amplitudes = Vec::with_capacity(spec.len());
        for b in &gy {
            for a in &gx {
                amplitudes.push(a * b);
            }
        }
        Self::new(spec, amplitudes, t, units)
    }

    /// `Σ|Ψ|²·ΔxΔy`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.spec.cell_area()
    }

    pub fn normalize(&mut self) {
        let s = self.norm().sqrt();
        if s > 0.0 {
            let inv = 1.0 / s;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn peak_density(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max)
    }

    /// Probability inside the region selected by `inside(x, y)`.
    pub fn mass_where<F: Fn(f64, f64) -> bool>(&self, inside: F) -> f64 {
        let s = &self.spec;
        let mut m = 0.0;
        for iy in 0..s.ny {
            let y = s.y(iy);
            let row = &self.amplitudes[iy * s.nx..(iy + 1) * s.nx];
            for (ix, a) in row.iter().enumerate() {
                if inside(s.x(ix), y) {
                    m += a.norm_sqr();
                }
            }
        }
        m * s.cell_area()
    }

    /// Density-weighted mean position.
    pub fn centroid(&self) -> [f64; 2] {
        let s = &self.spec;
        let (mut mx, mut my, mut m) = (0.0, 0.0, 0.0);
        for iy in 0..s.ny {
            for ix in 0..s.nx {
                let r = self.amplitudes[s.index(ix, iy)].norm_sqr();
                mx += r * s.x(ix);
                my += r * s.y(iy);
                m += r;
            }
        }
        [mx / m, my / m]
    }

    /// `‖a − b‖₂ = (Σ|a−b|²·ΔxΔy)^{1/2}`.
    pub fn l2_distance(&self, other: &[Complex64]) -> Result<f64, GridError> {
        self.spec.check_len(other.len())?;
        let s: f64 = self
            .amplitudes
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.spec.cell_area()).sqrt())
    }

    /// Largest density on the outermost ring of grid points.
    pub fn boundary_density(&self) -> f64 {
        let s = &self.spec;
        let mut m: f64 = 0.0;
        for ix in 0..s.nx {
            m = m.max(self.amplitudes[s.index(ix, 0)].norm_sqr());
            m = m.max(self.amplitudes[s.index(ix, s.ny - 1)].norm_sqr());
        }
        for iy in 0..s.ny {
            m = m.max(self.amplitudes[s.index(0, iy)].norm_sqr());
            m = m.max(self.amplitudes[s.index(s.nx - 1, iy)].norm_sqr());
        }
        m
    }
}

/// `(Σ(ρa − ρb)²·ΔxΔy)^{1/2}` between two density arrays.
pub fn density_l2_distance(spec: &GridSpec, a: &[f64], b: &[f64]) -> Result<f64, GridError> {
    spec.check_len(a.len())?;
    spec.check_len(b.len())?;
    let s: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok((s * spec.cell_area()).sqrt())
}
