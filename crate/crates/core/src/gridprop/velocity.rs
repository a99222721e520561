//! Velocity fields sampled from grid wave functions and trajectories
//! advanced in lockstep with the propagation.
//!
//! Grid-point velocities are central differences of the phase,
//! `v_x = (ħ/m)·[arg(Ψ_{i+1}Ψ*_i) + arg(Ψ_iΨ*_{i−1})]/2Δx`, with each
//! one-cell step unwrapped separately. Plane waves are exact up to the
//! Nyquist wavenumber.

use num_complex::Complex64;
use rayon::prelude::*;

use super::interp::{InterpolatedSampler, StepInterpolator};
use super::potential::PotentialSchedule;
use super::propagate::ScheduledRun;
use super::{GridError, GridSpec, GridWaveField};
use crate::fields::FieldError;
use crate::trajectories::{
    advance_outer_step, time_grid, IntegratorConfig, Point, StepOutcome, Trajectory,
    TrajectoryEnsemble, TrajectoryStatus, VelocityFieldSource,
};

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Velocity at grid point `(ix, iy)` from an amplitude accessor.
#[inline]
fn point_velocity<F: Fn(usize, usize) -> Complex64>(
    psi: &F,
    spec: &GridSpec,
    c: f64,
    ix: usize,
    iy: usize,
) -> [f64; 2] {
    let (i, j) = (ix as isize, iy as isize);
    let xp = psi(wrap(i + 1, spec.nx), iy);
    let xm = psi(wrap(i - 1, spec.nx), iy);
    let yp = psi(ix, wrap(j + 1, spec.ny));
    let ym = psi(ix, wrap(j - 1, spec.ny));
    let p0 = psi(ix, iy);
    // Two one-sided phase steps, each unwrapped on its own, so phase
    // gradients up to the Nyquist wavenumber are resolved.
    let slope = |a: Complex64, b: Complex64| (a * p0.conj()).arg() + (p0 * b.conj()).arg();
    [
        c * slope(xp, xm) / (2.0 * spec.dx()),
        c * slope(yp, ym) / (2.0 * spec.dy()),
    ]
}

/// Lower-left cell corner and fractional offsets of `pos`.
#[inline]
fn locate(spec: &GridSpec, pos: &Point<2>) -> (usize, usize, f64, f64) {
    let gx = (pos[0] - spec.x_min) / spec.dx();
    let gy = (pos[1] - spec.y_min) / spec.dy();
    let (fx, fy) = (gx.floor(), gy.floor());
    (
        wrap(fx as isize, spec.nx),
        wrap(fy as isize, spec.ny),
        gx - fx,
        gy - fy,
    )
}

#[inline]
fn bilinear(v: [[f64; 2]; 4], fx: f64, fy: f64) -> Point<2> {
    let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
    let mut out = [0.0; 2];
    for k in 0..4 {
        out[0] += w[k] * v[k][0];
        out[1] += w[k] * v[k][1];
    }
    out
}

/// Velocity arrays of a single field plus a bilinear sampler over them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVelocityField {
    pub spec: GridSpec,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    /// Grid points whose density is below the node threshold.
    pub node: Vec<bool>,
    pub time: f64,
}

/// Grid-point velocities of `field`; nodes are points with density below
/// `node_threshold` times the peak density.
pub fn grid_velocity_field(field: &GridWaveField, node_threshold: f64) -> GridVelocityField {
    let spec = field.spec;
    let c = field.units.hbar_over_mass();
    let thr = node_threshold * field.peak_density();
    let amps = &field.amplitudes;
    let psi = |ix: usize, iy: usize| amps[spec.index(ix, iy)];
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = (0..spec.ny)
        .into_par_iter()
        .map(|iy| {
            let mut vx = Vec::with_capacity(spec.nx);
            let mut vy = Vec::with_capacity(spec.nx);
            let mut node = Vec::with_capacity(spec.nx);
            for ix in 0..spec.nx {
                let v = point_velocity(&psi, &spec, c, ix, iy);
                vx.push(v[0]);
                vy.push(v[1]);
                let rho = psi(ix, iy).norm_sqr();
                node.push(!(rho >= thr) || rho == 0.0);
            }
            (vx, vy, node)
        })
        .collect();
    let mut out = GridVelocityField {
        spec,
        vx: Vec::with_capacity(spec.len()),
        vy: Vec::with_capacity(spec.len()),
        node: Vec::with_capacity(spec.len()),
        time: field.time,
    };
    for (a, b, n) in rows {
        out.vx.extend(a);
        out.vy.extend(b);
        out.node.extend(n);
    }
    out
}

impl GridVelocityField {
    /// Bilinear interpolation of the stored velocities.
    pub fn sample(&self, pos: &Point<2>) -> Result<Point<2>, FieldError> {
        let s = &self.spec;
        let (ix, iy, fx, fy) = locate(s, pos);
        let ix1 = (ix + 1) % s.nx;
        let iy1 = (iy + 1) % s.ny;
        let mut v = [[0.0; 2]; 4];
        for (k, &(a, b)) in [(ix, iy), (ix1, iy), (ix, iy1), (ix1, iy1)].iter().enumerate() {
            let i = s.index(a, b);
            if self.node[i] {
                return Err(FieldError::Node {
                    density: 0.0,
                    threshold: f64::NAN,
                });
            }
            v[k] = [self.vx[i], self.vy[i]];
        }
        Ok(bilinear(v, fx, fy))
    }
}

/// Time is ignored: the field is frozen at [`GridVelocityField::time`], and
/// the node test was fixed when the arrays were built.
impl VelocityFieldSource<2> for GridVelocityField {
    fn velocity(&self, pos: &Point<2>, _t: f64, _node_threshold: f64) -> Result<Point<2>, FieldError> {
        self.sample(pos)
    }

    fn contains(&self, pos: &Point<2>) -> bool {
        self.spec.contains(pos)
    }
}

/// Live trajectories advanced one propagation step at a time.
#[derive(Debug, Clone)]
pub struct TrajectoryStepper {
    config: IntegratorConfig,
    timestamps: Vec<f64>,
    trajectories: Vec<Trajectory<2>>,
}

impl TrajectoryStepper {
    /// Starts at `t0`; initial points outside `spec` are flagged absorbed.
    pub fn new(initials: &[Point<2>], t0: f64, spec: &GridSpec, config: IntegratorConfig) -> Self {
        let trajectories = initials
            .iter()
            .map(|p| Trajectory {
                positions: vec![*p],
                status: if spec.contains(p) {
                    TrajectoryStatus::Completed
                } else {
                    TrajectoryStatus::Absorbed
                },
            })
            .collect();
        Self {
            config,
            timestamps: vec![t0],
            trajectories,
        }
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn trajectories(&self) -> &[Trajectory<2>] {
        &self.trajectories
    }

    /// Current positions of every trajectory (last stored point).
    pub fn current(&self) -> Vec<Point<2>> {
        self.trajectories
            .iter()
            .map(|t| *t.positions.last().expect("trajectories start with one point"))
            .collect()
    }

    /// Moves every live trajectory across `[sampler.t0, sampler.t1]`.
    pub fn advance(&mut self, sampler: &InterpolatedSampler<'_>) {
        let (t, h) = (sampler.t0(), sampler.t1() - sampler.t0());
        let config = self.config;
        self.trajectories.par_iter_mut().for_each(|tr| {
            if !tr.status.is_complete() {
                return;
            }
            let x = *tr.positions.last().expect("non-empty");
            match advance_outer_step(sampler, &x, t, h, &config) {
                StepOutcome::Moved { position, rescued } => {
                    tr.positions.push(position);
                    if !sampler.contains(&position) {
                        tr.status = TrajectoryStatus::Absorbed;
                    } else if rescued {
                        tr.status = TrajectoryStatus::NodeRescued;
                    }
                }
                StepOutcome::Stalled => tr.status = TrajectoryStatus::NodeStalled,
            }
        });
        self.timestamps.push(sampler.t1());
    }

    pub fn into_ensemble(self, seed: u64) -> TrajectoryEnsemble<2> {
        let mut e = TrajectoryEnsemble::empty(self.timestamps, seed);
        for t in self.trajectories {
            e.push(t);
        }
        e
    }
}

/// Propagates `field0` under `schedule` to `t_end` and advances trajectories
/// from `initials` with RK4 against the time-interpolated field of each step.
///
/// Returns the ensemble (timestamps are the propagation steps) and the final
/// field. `config.dt` is ignored in favour of `dt`.
pub fn synchronized_trajectories(
    initials: &[Point<2>],
    field0: GridWaveField,
    schedule: &PotentialSchedule,
    t_end: f64,
    dt: f64,
    config: &IntegratorConfig,
    seed: u64,
) -> Result<(TrajectoryEnsemble<2>, GridWaveField), GridError> {
    let cfg = IntegratorConfig { dt, ..*config };
    cfg.validate()
        .map_err(|e| GridError::InvalidRequest(e.to_string()))?;
    let t0 = field0.time;
    if !(t_end > t0) {
        return Err(GridError::InvalidRequest(format!("t_end = {t_end} must exceed the field time {t0}")));
    }
    let spec = field0.spec;
    let units = field0.units;
    let mut run = ScheduledRun::new(field0, schedule.clone(), dt)?;
    run.check_coverage(t_end)?;
    let mut stepper = TrajectoryStepper::new(initials, t0, &spec, cfg);
    let mut steps = StepInterpolator::new(run.field());
    for t_next in time_grid(t0, t_end, dt).into_iter().skip(1) {
        run.step_to(t_next)?;
        steps.push(run.field());
        stepper.advance(&steps.sampler(units));
    }
    Ok((stepper.into_ensemble(seed), run.into_field()))
}
