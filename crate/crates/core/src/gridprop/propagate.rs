//! Strang split-operator stepping and schedule-driven propagation.

use num_complex::Complex64;
use rayon::prelude::*;

use super::potential::{rasterize_potential, PotentialSchedule};
use super::spectral::SpectralPlan;
use super::{GridError, GridSpec, GridWaveField};
use crate::fields::PhysicalUnits;
use crate::trajectories::{nearest_index, time_grid};

/// Raised when `dt·max|V|/ħ` exceeds π/4 and the potential phase per step is
/// under-resolved. Propagation still proceeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityWarning {
    pub t: f64,
    pub phase_per_step: f64,
}

impl StabilityWarning {
    pub const LIMIT: f64 = std::f64::consts::FRAC_PI_4;

    fn check(potential: &[f64], dt: f64, units: &PhysicalUnits, t: f64) -> Option<Self> {
        let vmax = potential.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let phase = dt * vmax / units.hbar;
        (phase > Self::LIMIT).then_some(Self {
            t,
            phase_per_step: phase,
        })
    }
}

impl std::fmt::Display for StabilityWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "potential phase per step {:.3} exceeds pi/4 at t = {}; reduce dt or the wall height",
            self.phase_per_step, self.t
        )
    }
}

fn multiply(a: &mut [Complex64], b: &[Complex64]) {
    a.par_chunks_mut(4096)
        .zip(b.par_chunks(4096))
        .for_each(|(x, y)| x.iter_mut().zip(y).for_each(|(p, q)| *p *= q));
}

/// Reusable FFT plan, scratch buffer and cached kinetic multiplier.
#[derive(Debug)]
pub struct Propagator {
    spec: GridSpec,
    units: PhysicalUnits,
    plan: SpectralPlan,
    spectrum: Vec<Complex64>,
    kinetic: Option<(u64, Vec<Complex64>)>,
}

impl Propagator {
    pub fn new(spec: GridSpec, units: PhysicalUnits) -> Self {
        Self {
            plan: SpectralPlan::new(&spec),
            spectrum: vec![Complex64::new(0.0, 0.0); spec.len()],
            kinetic: None,
            spec,
            units,
        }
    }

    /// `exp(−iV·dt/2ħ)`, the potential half-step multiplier.
    pub fn half_phase(potential: &[f64], units: &PhysicalUnits, dt: f64) -> Vec<Complex64> {
        let c = -0.5 * dt / units.hbar;
        potential
            .par_iter()
            .map(|v| {
                if *v == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, c * v)
                }
            })
            .collect()
    }

    /// One Strang step: half potential, full kinetic, half potential.
    /// `half_phase` must come from [`Propagator::half_phase`] with the same `dt`.
    pub fn step(&mut self, field: &mut GridWaveField, half_phase: &[Complex64], dt: f64) -> Result<(), GridError> {
        self.spec.check_len(field.amplitudes.len())?;
        self.spec.check_len(half_phase.len())?;
        if field.spec != self.spec {
            return Err(GridError::InvalidRequest("field grid differs from the propagator grid".into()));
        }
        let key = dt.to_bits();
        if self.kinetic.as_ref().map(|k| k.0) != Some(key) {
            self.kinetic = Some((key, SpectralPlan::kinetic_phase(&self.spec, &self.units, dt)));
        }
        let kinetic = &self.kinetic.as_ref().expect("cached above").1;
        multiply(&mut field.amplitudes, half_phase);
        self.plan.forward(&mut field.amplitudes, &mut self.spectrum);
        multiply(&mut self.spectrum, kinetic);
        self.plan.inverse(&mut self.spectrum, &mut field.amplitudes);
        multiply(&mut field.amplitudes, half_phase);
        field.time += dt;
        Ok(())
    }
}

/// A single split-operator step of `field` under `potential`.
///
/// Builds a fresh FFT plan; use [`Propagator`] or [`ScheduledRun`] for loops.
pub fn split_step(
    field: &mut GridWaveField,
    potential: &[f64],
    dt: f64,
) -> Result<Option<StabilityWarning>, GridError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GridError::InvalidRequest(format!("dt must be positive, got {dt}")));
    }
    field.spec.check_len(potential.len())?;
    let warning = StabilityWarning::check(potential, dt, &field.units, field.time);
    let mut p = Propagator::new(field.spec, field.units);
    let half = Propagator::half_phase(potential, &field.units, dt);
    p.step(field, &half, dt)?;
    Ok(warning)
}

/// Field captured at the step nearest to a requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub requested: f64,
    pub stage: usize,
    pub field: GridWaveField,
}

/// Stepper that follows a [`PotentialSchedule`], caching rasterised stages.
#[derive(Debug)]
pub struct ScheduledRun {
    propagator: Propagator,
    schedule: PotentialSchedule,
    potentials: Vec<Option<Vec<f64>>>,
    phases: Vec<Option<(u64, Vec<Complex64>)>>,
    field: GridWaveField,
    t0: f64,
    dt: f64,
    steps: u64,
    warnings: Vec<StabilityWarning>,
}

impl ScheduledRun {
    pub fn new(field: GridWaveField, schedule: PotentialSchedule, dt: f64) -> Result<Self, GridError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GridError::InvalidRequest(format!("dt must be positive, got {dt}")));
        }
        let n = schedule.stages().len();
        Ok(Self {
            propagator: Propagator::new(field.spec, field.units),
            potentials: vec![None; n],
            phases: vec![None; n],
            t0: field.time,
            field,
            schedule,
            dt,
            steps: 0,
            warnings: Vec::new(),
        })
    }

    pub fn field(&self) -> &GridWaveField {
        &self.field
    }

    pub fn into_field(self) -> GridWaveField {
        self.field
    }

    pub fn schedule(&self) -> &PotentialSchedule {
        &self.schedule
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.field.time
    }

    pub fn warnings(&self) -> &[StabilityWarning] {
        &self.warnings
    }

    fn tol(&self) -> f64 {
        1e-9 * self.dt
    }

    pub fn stage_at(&self, t: f64) -> Result<usize, GridError> {
        self.schedule.stage_at(t, self.tol()).ok_or(GridError::ScheduleGap { t })
    }

    pub fn check_coverage(&self, t_end: f64) -> Result<(), GridError> {
        self.schedule.check_coverage(self.field.time, t_end, self.tol())
    }

    /// Rasterised potential of stage `i`.
    pub fn potential(&mut self, i: usize) -> &[f64] {
        let spec = self.field.spec;
        let stage = &self.schedule.stages()[i];
        self.potentials[i].get_or_insert_with(|| rasterize_potential(stage, &spec))
    }

    /// Advances with one full step of the nominal `dt`.
    pub fn step(&mut self) -> Result<(), GridError> {
        let next = self.t0 + (self.steps + 1) as f64 * self.dt;
        self.step_to(next)
    }

    /// Advances to `t_next` with one step, using the stage active at the
    /// current time.
    pub fn step_to(&mut self, t_next: f64) -> Result<(), GridError> {
        let t = self.field.time;
        let mut h = t_next - t;
        // Nominal steps reuse the cached multipliers despite round-off in t.
        if (h - self.dt).abs() <= self.tol() {
            h = self.dt;
        }
        if !(h > 0.0) {
            return Err(GridError::InvalidRequest(format!("cannot step from {t} to {t_next}")));
        }
        let i = self.stage_at(t)?;
        let units = self.field.units;
        let key = h.to_bits();
        if self.phases[i].as_ref().map(|p| p.0) != Some(key) {
            let v = self.potential(i);
            let warning = StabilityWarning::check(v, h, &units, t);
            let phase = Propagator::half_phase(v, &units, h);
            if let Some(w) = warning {
                self.warnings.push(w);
            }
            self.phases[i] = Some((key, phase));
        }
        let phase = &self.phases[i].as_ref().expect("cached above").1;
        self.propagator.step(&mut self.field, phase, h)?;
        self.field.time = t_next;
        self.steps += 1;
        Ok(())
    }
}

/// Propagates `field` to `t_end` with steps of `dt` (the last one shortened
/// if needed), capturing the step nearest to each of `snapshot_times`.
pub fn propagate(
    field: GridWaveField,
    schedule: &PotentialSchedule,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<(GridWaveField, Vec<Snapshot>), GridError> {
    let t0 = field.time;
    if !(t_end > t0) {
        return Err(GridError::InvalidRequest(format!("t_end = {t_end} must exceed the field time {t0}")));
    }
    let mut run = ScheduledRun::new(field, schedule.clone(), dt)?;
    run.check_coverage(t_end)?;
    let times = time_grid(t0, t_end, dt);
    let wanted: Vec<(usize, f64)> = snapshot_times
        .iter()
        .map(|&t| (nearest_index(&times, t).expect("non-empty grid"), t))
        .collect();
    let mut snapshots: Vec<Option<Snapshot>> = vec![None; wanted.len()];
    let capture = |run: &ScheduledRun, step: usize, snaps: &mut Vec<Option<Snapshot>>| -> Result<(), GridError> {
        for (k, &(idx, req)) in wanted.iter().enumerate() {
            if idx == step {
                let t = run.time();
                // The final grid time may sit past the last stage start.
                let stage = run.stage_at(t).or_else(|_| run.stage_at(times[step.saturating_sub(1)]))?;
                snaps[k] = Some(Snapshot {
                    requested: req,
                    stage,
                    field: run.field().clone(),
                });
            }
        }
        Ok(())
    };
    capture(&run, 0, &mut snapshots)?;
    for (step, t_next) in times.iter().enumerate().skip(1) {
        run.step_to(*t_next)?;
        capture(&run, step, &mut snapshots)?;
    }
    let snapshots = snapshots.into_iter().map(|s| s.expect("every snapshot index is visited")).collect();
    Ok((run.into_field(), snapshots))
}
