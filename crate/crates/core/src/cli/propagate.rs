//! Free or harmonic 2D propagation with snapshots and a norm log.

use std::f64::consts::PI;

use toml::{Table, Value};

use super::output::{real, BundleWriter, CsvTable};
use super::{CliError, RunConfig};
use crate::analytic::GaussianPacket;
use crate::fields::PhysicalUnits;
use crate::gridprop::{density_l2_distance, GridError, GridSpec, GridWaveField, Propagator, StabilityWarning};
use crate::trajectories::time_grid;

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub(super) fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.positive("units.hbar")?;
    cfg.positive("units.mass")?;
    let n = cfg.count("grid.n", 8)?;
    if n % 2 != 0 {
        return Err(cfg.invalid("grid.n", format!("must be even, got {n}")));
    }
    if cfg.f64("grid.hi") <= cfg.finite("grid.lo")? {
        return Err(cfg.invalid("grid.hi", "must exceed grid.lo"));
    }
    for k in ["packet.x0", "packet.y0", "packet.px", "packet.py"] {
        cfg.finite(k)?;
    }
    cfg.positive("packet.sigma")?;
    cfg.positive("potential.omega")?;
    cfg.positive("time.t_end")?;
    cfg.positive("time.dt")?;
    cfg.count("output.snapshots", 1)?;
    cfg.count("output.norm_interval", 1)?;
    Ok(())
}

fn packets(cfg: &RunConfig) -> Result<(GaussianPacket, GaussianPacket), CliError> {
    let s = cfg.f64("packet.sigma");
    let px = GaussianPacket::new(cfg.f64("packet.x0"), cfg.f64("packet.px"), s, 1.0);
    let py = GaussianPacket::new(cfg.f64("packet.y0"), cfg.f64("packet.py"), s, 1.0);
    match (px, py) {
        (Ok(a), Ok(b)) => Ok((a, b)),
        (Err(e), _) | (_, Err(e)) => Err(CliError::Validation(e.to_string())),
    }
}

/// `m ω² r² / 2` about the origin.
pub fn harmonic_potential(spec: &GridSpec, units: &PhysicalUnits, omega: f64) -> Vec<f64> {
    let k = 0.5 * units.mass * omega * omega;
    let mut v = Vec::with_capacity(spec.len());
    for iy in 0..spec.ny {
        let y = spec.y(iy);
        for ix in 0..spec.nx {
            let x = spec.x(ix);
            v.push(k * (x * x + y * y));
        }
    }
    v
}

pub(super) fn run(cfg: &RunConfig, out: &mut BundleWriter) -> Result<(), CliError> {
    let units = PhysicalUnits::new(cfg.f64("units.hbar"), cfg.f64("units.mass")).map_err(|e| CliError::Validation(e.to_string()))?;
    let spec = GridSpec::square(cfg.count("grid.n", 8)?, cfg.f64("grid.lo"), cfg.f64("grid.hi"))?;
    let (px, py) = packets(cfg)?;
    let mut field = GridWaveField::product_gaussian(spec, units, &px, &py, 0.0)?;
    let initial = field.clone();
    let harmonic = cfg.str("potential.kind") == "harmonic";
    let omega = cfg.f64("potential.omega");
    let potential = if harmonic {
        harmonic_potential(&spec, &units, omega)
    } else {
        vec![0.0; spec.len()]
    };

    let t_end = cfg.f64("time.t_end");
    let dt = cfg.f64("time.dt");
    let times = time_grid(0.0, t_end, dt);
    let steps = times.len() - 1;
    let n_snap = cfg.count("output.snapshots", 1)?;
    let snap_steps: Vec<usize> = if n_snap == 1 {
        vec![steps]
    } else {
        (0..n_snap).map(|k| (k * steps + (n_snap - 1) / 2) / (n_snap - 1)).collect()
    };
    let interval = cfg.count("output.norm_interval", 1)?;

    let vmax = potential.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if dt * vmax / units.hbar > StabilityWarning::LIMIT {
        eprintln!(
            "warning: potential phase per step {:.3} exceeds pi/4; reduce time.dt or the grid extent",
            dt * vmax / units.hbar
        );
    }
    let mut prop = Propagator::new(spec, units);
    let phase_for = |h: f64| Propagator::half_phase(&potential, &units, h);
    let nominal = phase_for(dt);
    let norm0 = field.norm();
    let mut log = CsvTable::new(&["step", "t[T]", "norm", "relative_drift"]);
    let mut log_row = |k: usize, f: &GridWaveField| {
        let n = f.norm();
        log.row(&[k.to_string(), real(f.time), real(n), real((n - norm0) / norm0)]);
        (n - norm0).abs() / norm0
    };
    let mut drift = log_row(0, &field);
    let mut snap_k = 0;
    let mut take = |k: usize, f: &GridWaveField, out: &mut BundleWriter| -> Result<(), CliError> {
        while snap_k < snap_steps.len() && snap_steps[snap_k] == k {
            out.snapshot(&format!("snap{snap_k:03}"), f, 0, &format!("step {k}"))?;
            snap_k += 1;
        }
        Ok(())
    };
    take(0, &field, out)?;
    for k in 1..=steps {
        let h = times[k] - times[k - 1];
        if (h - dt).abs() <= 1e-9 * dt {
            prop.step(&mut field, &nominal, dt)?;
        } else {
            let short = phase_for(h);
            prop.step(&mut field, &short, h)?;
        }
        field.time = times[k];
        if field.amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(GridError::NonFinite { t: field.time }.into());
        }
        if k % interval == 0 || k == steps {
            drift = drift.max(log_row(k, &field));
        }
        take(k, &field, out)?;
    }
    out.table("norm_log.csv", log)?;

    let mut report = Table::new();
    report.insert("potential".into(), Value::String(cfg.str("potential.kind").into()));
    report.insert("steps".into(), Value::Integer(steps as i64));
    report.insert("final_time".into(), Value::Float(field.time));
    report.insert("max_relative_norm_drift".into(), Value::Float(drift));
    report.insert("boundary_density".into(), Value::Float(field.boundary_density()));
    if harmonic {
        let period = 2.0 * PI / omega;
        report.insert("period".into(), Value::Float(period));
        report.insert("periods_elapsed".into(), Value::Float(field.time / period));
        let err = density_l2_distance(&spec, &field.density(), &initial.density())?;
        report.insert("density_l2_to_initial".into(), Value::Float(err));
    } else {
        let exact = GridWaveField::product_gaussian(spec, units, &px, &py, field.time)?;
        report.insert("l2_error_vs_analytic".into(), Value::Float(field.l2_distance(&exact.amplitudes)?));
    }
    out.report("propagate_report.toml", &report)?;
    Ok(())
}
