//! Width and depth of the effective interference well against time.

use toml::{Table, Value};

use super::output::{real, BundleWriter, CsvTable};
use super::{CliError, RunConfig};
use crate::analytic::{barrier_at, AnalyticError, BarrierParams};
use crate::fields::PhysicalUnits;
use crate::trajectories::time_grid;

pub(super) fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.positive("units.hbar")?;
    cfg.positive("units.mass")?;
    cfg.positive("packet.sigma0")?;
    cfg.positive("packet.x0")?;
    let momenta = cfg.f64_list("momenta");
    if momenta.is_empty() {
        return Err(cfg.invalid("momenta", "must list at least one momentum"));
    }
    if let Some(p) = momenta.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(cfg.invalid("momenta", format!("holds magnitudes and must be >= 0, got {p}")));
    }
    let t0 = cfg.finite("time.t_start")?;
    if t0 < 0.0 {
        return Err(cfg.invalid("time.t_start", "must be >= 0"));
    }
    if cfg.finite("time.t_end")? < t0 {
        return Err(cfg.invalid("time.t_end", "must not precede time.t_start"));
    }
    cfg.positive("time.dt")?;
    Ok(())
}

pub(super) fn run(cfg: &RunConfig, out: &mut BundleWriter) -> Result<(), CliError> {
    let units = PhysicalUnits::new(cfg.f64("units.hbar"), cfg.f64("units.mass")).map_err(|e| CliError::Validation(e.to_string()))?;
    let (t0, t1) = (cfg.f64("time.t_start"), cfg.f64("time.t_end"));
    let times = if t1 > t0 { time_grid(t0, t1, cfg.f64("time.dt")) } else { vec![t0] };
    let product = 2.0 * units.hbar * units.hbar / units.mass;
    let mut table = CsvTable::new(&["p0[M*L/T]", "t[T]", "W[L]", "D[E*L]", "singular"]);
    let mut report = Table::new();
    let mut singular = 0;
    let mut worst_ulps: u64 = 0;
    for p0 in cfg.f64_list("momenta") {
        let params = BarrierParams::new(cfg.f64("packet.sigma0"), cfg.f64("packet.x0"), p0).map_err(|e| CliError::Validation(e.to_string()))?;
        for &t in &times {
            match barrier_at(&params, &units, t) {
                Ok((w, d)) => {
                    worst_ulps = worst_ulps.max(ulps_apart(d * w, product));
                    table.row(&[real(p0), real(t), real(w), real(d), "false".into()]);
                }
                Err(AnalyticError::SingularTime { .. }) => {
                    singular += 1;
                    table.row(&[real(p0), real(t), "inf".into(), "0.0".into(), "true".into()]);
                }
                Err(e) => return Err(CliError::Numerical(e.to_string())),
            }
        }
    }
    out.table("barrier.csv", table)?;
    report.insert("curves".into(), Value::Integer(cfg.f64_list("momenta").len() as i64));
    report.insert("rows_per_curve".into(), Value::Integer(times.len() as i64));
    report.insert("singular_rows".into(), Value::Integer(singular));
    report.insert("product_target".into(), Value::Float(product));
    report.insert("product_max_ulps".into(), Value::Integer(worst_ulps as i64));
    out.report("barrier_report.toml", &report)?;
    Ok(())
}

/// Distance in units in the last place between two finite positive values.
pub fn ulps_apart(a: f64, b: f64) -> u64 {
    a.to_bits().abs_diff(b.to_bits())
}
