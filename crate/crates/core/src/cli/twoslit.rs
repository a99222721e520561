//! Two-packet interference: field maps, trajectories and the endpoint
//! histogram.

use toml::{Table, Value};

use super::output::{real, BundleWriter, CsvTable};
use super::{CliError, RunConfig};
use crate::analytic::{two_slit_model, AnalyticSuperposition};
use crate::fields::PhysicalUnits;
use crate::trajectories::{
    binned_density, check_non_crossing, ensemble_histogram, integrate_ensemble, ordering_preserved,
    total_variation, uniform_edges, uniform_grid_initial_conditions, Boundary, IntegratorConfig,
    InverseTransformSampler, TrajectoryEnsemble,
};

pub(super) fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    PhysicalUnits::new(cfg.positive("units.hbar")?, cfg.positive("units.mass")?)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    cfg.positive("packet.sigma0")?;
    cfg.positive("packet.x0")?;
    let p0 = cfg.finite("packet.p0")?;
    if p0 < 0.0 {
        return Err(cfg.invalid("packet.p0", "is a magnitude and must be >= 0"));
    }
    cfg.positive("time.t_end")?;
    cfg.positive("time.dt")?;
    if cfg.f64("lattice.x_max") <= cfg.finite("lattice.x_min")? {
        return Err(cfg.invalid("lattice.x_max", "must exceed lattice.x_min"));
    }
    cfg.count("lattice.nx", 2)?;
    cfg.count("lattice.nt", 2)?;
    cfg.count("ensemble.trajectories", 1)?;
    cfg.count("ensemble.seed", 0)?;
    cfg.count("ensemble.strata", 1)?;
    let nt = cfg.f64("integrator.node_threshold");
    if !(nt > 0.0 && nt < 1.0) {
        return Err(cfg.invalid("integrator.node_threshold", format!("must lie in (0, 1), got {nt}")));
    }
    let h = cfg.count("integrator.max_substep_halvings", 0)?;
    if h > 60 {
        return Err(cfg.invalid("integrator.max_substep_halvings", "must not exceed 60"));
    }
    cfg.count("histogram.bins", 1)?;
    if cfg.f64("histogram.hi") <= cfg.finite("histogram.lo")? {
        return Err(cfg.invalid("histogram.hi", "must exceed histogram.lo"));
    }
    cfg.count("output.trajectory_stride", 1)?;
    Ok(())
}

/// `n` points on `[lo, hi]`; symmetric ranges give exactly mirrored points.
fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let m = (n - 1) as f64;
    (0..n).map(|i| c + h * (2.0 * i as f64 - m) / m).collect()
}

/// Density, quantum potential, principal phase and velocity at one point,
/// all from the scaled sums so they survive underflow in the tails.
fn point_fields(model: &AnalyticSuperposition, x: f64, t: f64) -> [f64; 4] {
    let u = model.units();
    let e = model.evaluate_scaled(x, t);
    let rho = e.sum0.norm_sqr() * (2.0 * e.scale).exp();
    let l1 = e.sum1 / e.sum0;
    let l2 = e.sum2 / e.sum0;
    let q = -u.hbar * u.hbar / (2.0 * u.mass) * (l2.re + l1.im * l1.im);
    let phase = u.hbar * e.sum0.arg();
    let v = u.hbar_over_mass() * l1.im;
    [rho, q, phase, v]
}

pub(super) fn model(cfg: &RunConfig) -> Result<AnalyticSuperposition, CliError> {
    let units = PhysicalUnits::new(cfg.f64("units.hbar"), cfg.f64("units.mass")).map_err(|e| CliError::Validation(e.to_string()))?;
    two_slit_model(cfg.f64("packet.sigma0"), cfg.f64("packet.x0"), cfg.f64("packet.p0"), units)
        .map_err(|e| CliError::Validation(e.to_string()))
}

pub(super) fn initial_positions(cfg: &RunConfig, model: &AnalyticSuperposition) -> Result<Vec<f64>, CliError> {
    let n = cfg.count("ensemble.trajectories", 1)?;
    if cfg.str("ensemble.initial") == "uniform" {
        let (s, x0) = (cfg.f64("packet.sigma0"), cfg.f64("packet.x0"));
        let mut xs = uniform_grid_initial_conditions(n / 2, (-x0 - 3.0 * s, -x0 + 3.0 * s));
        xs.extend(uniform_grid_initial_conditions(n - n / 2, (x0 - 3.0 * s, x0 + 3.0 * s)));
        return Ok(xs);
    }
    let domain = model.support(0.0, 10.0);
    let sampler = InverseTransformSampler::new(|x| model.density(x, 0.0), domain).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(sampler.sample(n, cfg.seed().unwrap_or(0), cfg.count("ensemble.strata", 1)?))
}

pub(super) fn ensemble(cfg: &RunConfig, model: &AnalyticSuperposition) -> Result<TrajectoryEnsemble<1>, CliError> {
    let xs = initial_positions(cfg, model)?;
    let initials: Vec<[f64; 1]> = xs.into_iter().map(|x| [x]).collect();
    let config = IntegratorConfig {
        dt: cfg.f64("time.dt"),
        node_threshold: cfg.f64("integrator.node_threshold"),
        max_substep_halvings: cfg.i64("integrator.max_substep_halvings") as u32,
    };
    integrate_ensemble(model, &initials, 0.0, cfg.f64("time.t_end"), &config, cfg.seed().unwrap_or(0))
        .map_err(|e| CliError::Numerical(e.to_string()))
}

pub(super) fn run(cfg: &RunConfig, out: &mut BundleWriter) -> Result<(), CliError> {
    let model = model(cfg)?;
    let t_end = cfg.f64("time.t_end");
    let xs = lattice(cfg.f64("lattice.x_min"), cfg.f64("lattice.x_max"), cfg.count("lattice.nx", 2)?);
    let ts = lattice(0.0, t_end, cfg.count("lattice.nt", 2)?);

    let names = ["rho", "quantum_potential", "phase", "velocity"];
    let units = ["1/L", "E", "E*T", "L/T"];
    let mut maps: Vec<CsvTable> = names
        .iter()
        .zip(units)
        .map(|(n, u)| CsvTable::new(&["t[T]", "x[L]", &format!("{n}[{u}]")]))
        .collect();
    for &t in &ts {
        let rows: Vec<[f64; 4]> = xs.iter().map(|&x| point_fields(&model, x, t)).collect();
        let principal: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let unwrapped = crate::fields::unwrap_phase(&principal, model.units());
        for ((x, r), s) in xs.iter().zip(&rows).zip(&unwrapped) {
            let vals = [r[0], r[1], *s, r[3]];
            for (m, v) in maps.iter_mut().zip(vals) {
                m.row(&[real(t), real(*x), real(v)]);
            }
        }
    }
    for (m, n) in maps.into_iter().zip(names) {
        out.table(&format!("{n}.csv"), m)?;
    }

    let ens = ensemble(cfg, &model)?;
    let stride = cfg.count("output.trajectory_stride", 1)?;
    let mut traj = CsvTable::new(&["traj_id", "t[T]", "x[L]"]);
    let last = ens.timestamps.len() - 1;
    for (id, path) in ens.positions.iter().enumerate() {
        for (k, p) in path.iter().enumerate() {
            if k % stride == 0 || k == last {
                traj.row(&[id.to_string(), real(ens.timestamps[k]), real(p[0])]);
            }
        }
    }
    out.table("trajectories.csv", traj)?;
    let mut status = CsvTable::new(&["traj_id", "x0[L]", "status"]);
    for (id, (path, flag)) in ens.positions.iter().zip(&ens.flags).enumerate() {
        status.row(&[id.to_string(), real(path[0][0]), flag.as_str().to_string()]);
    }
    out.table("trajectory_status.csv", status)?;

    let edges = uniform_edges(cfg.f64("histogram.lo"), cfg.f64("histogram.hi"), cfg.count("histogram.bins", 1)?);
    let hist = ensemble_histogram(&ens, t_end, &edges).map_err(|e| CliError::Validation(e.to_string()))?;
    let exact = binned_density(|x| model.density(x, t_end), &edges, 64).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut h = CsvTable::new(&["bin_lo[L]", "bin_hi[L]", "ensemble", "analytic"]);
    for (k, w) in edges.windows(2).enumerate() {
        h.row(&[real(w[0]), real(w[1]), real(hist[k]), real(exact[k])]);
    }
    out.table("histogram.csv", h)?;

    let crossing = check_non_crossing(&ens, &Boundary::point(0.0));
    let mut report = Table::new();
    report.insert("trajectories".into(), Value::Integer(ens.len() as i64));
    let complete = ens.flags.iter().filter(|f| f.is_complete()).count();
    report.insert("completed".into(), Value::Integer(complete as i64));
    report.insert("crossings".into(), Value::Integer(crossing.violations as i64));
    report.insert("trajectories_crossing".into(), Value::Integer(crossing.trajectories_crossing as i64));
    report.insert("min_distance_to_axis".into(), Value::Float(crossing.min_distance));
    report.insert("ordering_preserved".into(), Value::Boolean(ordering_preserved(&ens)));
    report.insert("histogram_time".into(), Value::Float(t_end));
    report.insert("total_variation".into(), Value::Float(total_variation(&hist, &exact)));
    out.report("twoslit_report.toml", &report)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_is_mirror_symmetric() {
        let xs = lattice(-10.0, 10.0, 401);
        for i in 0..xs.len() {
            assert_eq!(xs[i], -xs[xs.len() - 1 - i]);
        }
        assert_eq!(xs[0], -10.0);
        assert_eq!(xs[200], 0.0);
    }

    #[test]
    fn tail_fields_stay_finite() {
        let cfg = RunConfig::defaults(super::super::CommandName::TwoSlit, "out");
        let m = model(&cfg).unwrap();
        let f = point_fields(&m, 40.0, 0.0);
        assert_eq!(f[0], 0.0);
        assert!(f[1].is_finite() && f[3].is_finite());
    }
}
