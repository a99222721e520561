//! Continuous velocity fields between grid points and between steps.
//!
//! Amplitudes are interpolated with bicubic Hermite patches built from
//! spectral derivatives (`Ψ`, `∂xΨ`, `∂yΨ`, `∂x∂yΨ` at every node), and the
//! velocity is taken from the interpolant, `v = (ħ/m) Im(Ψ*∇Ψ)/|Ψ|²`. Unlike
//! interpolating grid-point velocities, this stays accurate across the
//! interference fringes that form at barriers, where the velocity varies
//! within a cell.

use num_complex::Complex64;
use rayon::prelude::*;

use super::spectral::SpectralPlan;
use super::{GridSpec, GridWaveField};
use crate::fields::{FieldError, PhysicalUnits};
use crate::trajectories::{Point, VelocityFieldSource};

/// Amplitude and its cell-scaled derivatives `Δx∂x`, `Δy∂y`, `ΔxΔy∂x∂y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteField {
    pub spec: GridSpec,
    pub time: f64,
    /// Largest density at the grid points.
    pub peak: f64,
    psi: Vec<Complex64>,
    dx: Vec<Complex64>,
    dy: Vec<Complex64>,
    dxy: Vec<Complex64>,
}

/// Spectral derivative factor `i·k·h` for bin `i`, zero at the Nyquist bin.
fn derivative_factors(n: usize, length: f64, h: f64) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            if 2 * i == n {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, GridSpec::wavenumber(i, n, length) * h)
            }
        })
        .collect()
}

impl HermiteField {
    pub fn new(field: &GridWaveField, plan: &SpectralPlan) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); field.spec.len()];
        let mut out = Self {
            spec: field.spec,
            time: field.time,
            peak: 0.0,
            psi: zero.clone(),
            dx: zero.clone(),
            dy: zero.clone(),
            dxy: zero,
        };
        out.refresh(field, plan);
        out
    }

    /// Recomputes the derivatives for `field`, reusing the buffers.
    ///
    /// # Panics
    /// If `field` is on a different grid.
    pub fn refresh(&mut self, field: &GridWaveField, plan: &SpectralPlan) {
        assert_eq!(field.spec, self.spec, "grid mismatch");
        let s = self.spec;
        let (nx, ny) = (s.nx, s.ny);
        self.time = field.time;
        self.peak = field.peak_density();
        self.psi.copy_from_slice(&field.amplitudes);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); s.len()];
        // `dxy` doubles as scratch for the forward transform.
        self.dxy.copy_from_slice(&field.amplitudes);
        plan.forward(&mut self.dxy, &mut spectrum);
        let scale = 1.0 / (nx * ny) as f64;
        let fx = derivative_factors(nx, s.x_max - s.x_min, s.dx());
        let fy = derivative_factors(ny, s.y_max - s.y_min, s.dy());
        let mut work = vec![Complex64::new(0.0, 0.0); s.len()];
        for (kind, out) in [(0, &mut self.dx), (1, &mut self.dy), (2, &mut self.dxy)] {
            // Transposed layout: row `i` is kx bin `i`, column `j` is ky bin `j`.
            work.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
                let src = &spectrum[i * ny..(i + 1) * ny];
                for (j, w) in row.iter_mut().enumerate() {
                    let f = match kind {
                        0 => fx[i],
                        1 => fy[j],
                        _ => fx[i] * fy[j],
                    };
                    *w = src[j] * f * scale;
                }
            });
            plan.inverse(&mut work, out);
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.psi
    }
}

const H0: [fn(f64) -> f64; 2] = [|s| (2.0 * s - 3.0) * s * s + 1.0, |s| (3.0 - 2.0 * s) * s * s];
const H1: [fn(f64) -> f64; 2] = [|s| ((s - 2.0) * s + 1.0) * s, |s| (s - 1.0) * s * s];
const DH0: [fn(f64) -> f64; 2] = [|s| 6.0 * s * (s - 1.0), |s| 6.0 * s * (1.0 - s)];
const DH1: [fn(f64) -> f64; 2] = [|s| (3.0 * s - 4.0) * s + 1.0, |s| (3.0 * s - 2.0) * s];

/// Value and gradient (per unit cell) of the bicubic Hermite patch at
/// fractional offsets `(u, v)` from corner data `[(ψ, ψu, ψv, ψuv); 4]`
/// ordered `(0,0), (1,0), (0,1), (1,1)`.
fn hermite_patch(c: &[[Complex64; 4]; 4], u: f64, v: f64) -> [Complex64; 3] {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (k, corner) in c.iter().enumerate() {
        let (a, b) = (k & 1, k >> 1);
        let (hu, gu, dhu, dgu) = (H0[a](u), H1[a](u), DH0[a](u), DH1[a](u));
        let (hv, gv, dhv, dgv) = (H0[b](v), H1[b](v), DH0[b](v), DH1[b](v));
        let [p, pu, pv, puv] = *corner;
        out[0] += p * (hu * hv) + pu * (gu * hv) + pv * (hu * gv) + puv * (gu * gv);
        out[1] += p * (dhu * hv) + pu * (dgu * hv) + pv * (dhu * gv) + puv * (dgu * gv);
        out[2] += p * (hu * dhv) + pu * (gu * dhv) + pv * (hu * dgv) + puv * (gu * dgv);
    }
    out
}

/// Velocity of the amplitude interpolated linearly in time between the
/// Hermite data at the two ends of one propagation step.
///
/// The later field is first rotated by the global phase accumulated over
/// the step (the phase of `⟨Ψ₀|Ψ₁⟩`), so the linear blend tracks the
/// envelope instead of averaging two rotated copies of the carrier.
/// Velocities depend on Ψ only through `∇Ψ/Ψ`, so neither the rotation nor
/// the lost normalisation changes them.
#[derive(Debug, Clone, Copy)]
pub struct InterpolatedSampler<'a> {
    pub units: PhysicalUnits,
    pub start: &'a HermiteField,
    pub end: &'a HermiteField,
    /// Unit factor applied to `end`.
    pub rotation: Complex64,
    /// Peak density used for the relative node threshold.
    pub peak: f64,
}

impl<'a> InterpolatedSampler<'a> {
    /// # Panics
    /// If the two fields are on different grids.
    pub fn new(start: &'a HermiteField, end: &'a HermiteField, units: PhysicalUnits) -> Self {
        assert_eq!(start.spec, end.spec, "grid mismatch");
        // Row sums in parallel, combined in a fixed order.
        let n = start.spec.nx;
        let rows: Vec<Complex64> = start
            .psi
            .par_chunks(n)
            .zip(end.psi.par_chunks(n))
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| b * a.conj()).sum())
            .collect();
        let overlap: Complex64 = rows.iter().sum();
        let rotation = if overlap.norm() > 0.0 {
            overlap.conj() / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        Self {
            units,
            start,
            end,
            rotation,
            peak: start.peak.max(end.peak),
        }
    }

    pub fn t0(&self) -> f64 {
        self.start.time
    }

    pub fn t1(&self) -> f64 {
        self.end.time
    }
}

impl VelocityFieldSource<2> for InterpolatedSampler<'_> {
    fn velocity(&self, pos: &Point<2>, t: f64, node_threshold: f64) -> Result<Point<2>, FieldError> {
        let thr = node_threshold * self.peak;
        let node = |density: f64| FieldError::Node {
            density,
            threshold: thr,
        };
        if !(pos[0].is_finite() && pos[1].is_finite()) {
            return Err(node(f64::NAN));
        }
        let span = self.t1() - self.t0();
        let tau = if span > 0.0 {
            ((t - self.t0()) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let wa = 1.0 - tau;
        let wb = self.rotation * tau;
        let s = &self.start.spec;
        let gx = (pos[0] - s.x_min) / s.dx();
        let gy = (pos[1] - s.y_min) / s.dy();
        let (fx, fy) = (gx.floor(), gy.floor());
        let ix = (fx as isize).rem_euclid(s.nx as isize) as usize;
        let iy = (fy as isize).rem_euclid(s.ny as isize) as usize;
        let ix1 = (ix + 1) % s.nx;
        let iy1 = (iy + 1) % s.ny;
        let (a, b) = (self.start, self.end);
        let mut corners = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (k, &(cx, cy)) in [(ix, iy), (ix1, iy), (ix, iy1), (ix1, iy1)].iter().enumerate() {
            let i = s.index(cx, cy);
            let p = a.psi[i] * wa + b.psi[i] * wb;
            let rho = p.norm_sqr();
            if !(rho >= thr) || rho == 0.0 {
                return Err(node(rho));
            }
            corners[k] = [
                p,
                a.dx[i] * wa + b.dx[i] * wb,
                a.dy[i] * wa + b.dy[i] * wb,
                a.dxy[i] * wa + b.dxy[i] * wb,
            ];
        }
        let [p, pu, pv] = hermite_patch(&corners, gx - fx, gy - fy);
        let rho = p.norm_sqr();
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(node(rho));
        }
        let c = self.units.hbar_over_mass() / rho;
        Ok([
            c * (p.conj() * pu).im / s.dx(),
            c * (p.conj() * pv).im / s.dy(),
        ])
    }

    fn contains(&self, pos: &Point<2>) -> bool {
        self.start.spec.contains(pos)
    }
}

/// Hermite data at the two ends of the current step, refreshed as the
/// propagation advances.
#[derive(Debug)]
pub struct StepInterpolator {
    plan: SpectralPlan,
    start: HermiteField,
    end: HermiteField,
}

impl StepInterpolator {
    pub fn new(field: &GridWaveField) -> Self {
        let plan = SpectralPlan::new(&field.spec);
        let start = HermiteField::new(field, &plan);
        let end = start.clone();
        Self { plan, start, end }
    }

    /// Makes the previous end the new start and loads `field` as the end.
    pub fn push(&mut self, field: &GridWaveField) {
        std::mem::swap(&mut self.start, &mut self.end);
        self.end.refresh(field, &self.plan);
    }

    pub fn sampler(&self, units: PhysicalUnits) -> InterpolatedSampler<'_> {
        InterpolatedSampler::new(&self.start, &self.end, units)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(f: impl Fn(f64, f64) -> Complex64) -> GridWaveField {
        let s = GridSpec::square(64, -4.0, 4.0).unwrap();
        GridWaveField::from_fn(s, PhysicalUnits::default(), 0.0, f).unwrap()
    }

    #[test]
    fn spectral_derivatives_of_a_periodic_mode() {
        let k = std::f64::consts::PI / 4.0 * 3.0;
        let f = field_of(|x, y| Complex64::from_polar(1.0, k * x) * (k * y).cos());
        let plan = SpectralPlan::new(&f.spec);
        let h = HermiteField::new(&f, &plan);
        let d = f.spec.dx();
        for ix in [0, 7, 40] {
            for iy in [3, 33] {
                let (x, y) = (f.spec.x(ix), f.spec.y(iy));
                let i = f.spec.index(ix, iy);
                let e = Complex64::from_polar(1.0, k * x);
                let want_dx = Complex64::i() * k * d * e * (k * y).cos();
                let want_dy = -e * k * d * (k * y).sin();
                assert!((h.dx[i] - want_dx).norm() < 1e-12);
                assert!((h.dy[i] - want_dy).norm() < 1e-12);
                assert!((h.dxy[i] - Complex64::i() * k * d * want_dy).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermite_patch_reproduces_bicubic_polynomials() {
        let f = |u: f64, v: f64| Complex64::new(u * u * u - 2.0 * u * v * v + v, u * v * v * v - u);
        let fu = |u: f64, v: f64| Complex64::new(3.0 * u * u - 2.0 * v * v, v * v * v - 1.0);
        let fv = |u: f64, v: f64| Complex64::new(-4.0 * u * v + 1.0, 3.0 * u * v * v);
        let fuv = |_u: f64, v: f64| Complex64::new(-4.0 * v, 3.0 * v * v);
        let c = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].map(|(u, v)| [f(u, v), fu(u, v), fv(u, v), fuv(u, v)]);
        for (u, v) in [(0.3, 0.7), (0.0, 0.5), (0.91, 0.12)] {
            let [p, pu, pv] = hermite_patch(&c, u, v);
            assert!((p - f(u, v)).norm() < 1e-13);
            assert!((pu - fu(u, v)).norm() < 1e-13);
            assert!((pv - fv(u, v)).norm() < 1e-13);
        }
    }

    #[test]
    fn plane_wave_velocity_is_uniform_between_nodes() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let k = [two_pi * 3.0 / 8.0, -two_pi * 5.0 / 8.0];
        let a = field_of(|x, y| Complex64::from_polar(0.125, k[0] * x + k[1] * y));
        let mut b = a.clone();
        for z in &mut b.amplitudes {
            *z *= Complex64::from_polar(1.0, -1.3);
        }
        b.time = 1.0;
        let mut steps = StepInterpolator::new(&a);
        steps.push(&b);
        let s = steps.sampler(a.units);
        assert!((s.rotation - Complex64::from_polar(1.0, 1.3)).norm() < 1e-12);
        let g = f_spec_points(&a);
        for p in g {
            let w = s.velocity(&p, 0.4, 1e-12).unwrap();
            assert!((w[0] - k[0]).abs() < 1e-10 && (w[1] - k[1]).abs() < 1e-10, "{w:?}");
        }
        // Between nodes the cubic patch is accurate to O((kΔx)⁴), kΔx ≤ 0.5.
        for p in [[0.31, 3.1], [-2.44, 2.0], [3.99, -3.99]] {
            let w = s.velocity(&p, 0.4, 1e-12).unwrap();
            assert!((w[0] - k[0]).abs() < 1e-3 && (w[1] - k[1]).abs() < 1e-3, "{w:?}");
        }
    }

    fn f_spec_points(f: &GridWaveField) -> Vec<Point<2>> {
        [(0, 0), (5, 17), (63, 40)].iter().map(|&(i, j)| [f.spec.x(i), f.spec.y(j)]).collect()
    }

    #[test]
    fn standing_wave_velocity_follows_the_fringes() {
        // Two crossing plane waves; the velocity varies within a cell.
        let k = std::f64::consts::PI / 4.0 * 9.0;
        let r = 0.6;
        let psi = |x: f64, y: f64| Complex64::from_polar(1.0, k * x) + Complex64::from_polar(r, k * y);
        let f = field_of(psi);
        let mut steps = StepInterpolator::new(&f);
        steps.push(&f);
        let s = steps.sampler(f.units);
        for p in [[0.123, 0.456], [1.71, -2.29], [-3.05, 0.61]] {
            let z = psi(p[0], p[1]);
            let gx = Complex64::i() * k * Complex64::from_polar(1.0, k * p[0]);
            let gy = Complex64::i() * k * Complex64::from_polar(r, k * p[1]);
            let want = [(z.conj() * gx).im / z.norm_sqr(), (z.conj() * gy).im / z.norm_sqr()];
            let got = s.velocity(&p, 0.0, 1e-12).unwrap();
            assert!((got[0] - want[0]).abs() < 0.05 * k && (got[1] - want[1]).abs() < 0.05 * k, "{got:?} {want:?}");
        }
    }
}
