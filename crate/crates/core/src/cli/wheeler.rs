//! Delayed-choice interferometer runs.

use toml::{Table, Value};

use super::output::{real, BundleWriter, CsvTable};
use super::{CliError, RunConfig};
use crate::gridprop::GridError;
use crate::wheeler::{
    calibrate_beam_splitter, routing_analysis, run_scenario, Arm, ChoiceSchedule, Detector,
    InterferometerLayout, ScenarioConfig, WheelerError,
};

impl From<WheelerError> for CliError {
    fn from(e: WheelerError) -> Self {
        match &e {
            WheelerError::Config(_) | WheelerError::InvalidChoiceTime { .. } => CliError::Validation(e.to_string()),
            WheelerError::Grid(GridError::InvalidGrid(_) | GridError::InvalidSchedule(_) | GridError::InvalidRequest(_)) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// The scenario part of the merged configuration.
pub fn scenario(cfg: &RunConfig) -> Result<ScenarioConfig, CliError> {
    let mut table = cfg.effective();
    table.remove("output");
    let text = toml::to_string(&table).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(ScenarioConfig::from_toml_str(&text)?)
}

pub(super) fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.count("grid.n", 8)?;
    cfg.count("ensemble.seed", 0)?;
    cfg.count("ensemble.trajectories", 0)?;
    cfg.count("numerics.max_substep_halvings", 0)?;
    cfg.count("numerics.check_interval", 1)?;
    cfg.count("output.trajectory_stride", 1)?;
    let sc = scenario(cfg)?;
    let layout = InterferometerLayout::from_config(&sc, sc.geometry.splitter_height.max(1.0))?;
    ChoiceSchedule::from_config(&sc.choice, &layout)
        .validate(&layout)
        .map_err(|e| cfg.invalid("choice.switch_time", format!("is invalid: {e}")))
}

pub(super) fn run(cfg: &RunConfig, out: &mut BundleWriter) -> Result<(), CliError> {
    let sc = scenario(cfg)?;
    let base = InterferometerLayout::from_config(&sc, sc.geometry.splitter_height)?;
    let mut report = Table::new();
    let height = if sc.geometry.splitter_height > 0.0 {
        sc.geometry.splitter_height
    } else {
        let cal = calibrate_beam_splitter(&base, sc.geometry.wall_height, sc.numerics.dt, sc.numerics.calibration_tolerance)?;
        let mut t = CsvTable::new(&["evaluation", "height[E]", "transmission"]);
        for (k, (h, tr)) in cal.evaluations.iter().enumerate() {
            t.row(&[k.to_string(), real(*h), real(*tr)]);
        }
        out.table("calibration.csv", t)?;
        report.insert("calibrated_transmission".into(), Value::Float(cal.transmission));
        cal.height
    };
    let layout = base.with_splitter_height(height);
    let choice = ChoiceSchedule::from_config(&sc.choice, &layout);
    let outcome = run_scenario(
        &layout,
        choice,
        sc.ensemble.trajectories,
        sc.ensemble.seed,
        &sc.numerics,
        sc.ensemble.sampling,
    )?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }

    for (k, snap) in outcome.snapshots.iter().enumerate() {
        out.snapshot(&format!("stage{k}_{}", snap.label), &snap.field, snap.stage, snap.label)?;
    }

    let ens = &outcome.ensemble;
    let stride = cfg.count("output.trajectory_stride", 1)?;
    let mut traj = CsvTable::new(&["traj_id", "t[T]", "x[L]", "y[L]"]);
    for (id, path) in ens.positions.iter().enumerate() {
        let last = path.len().saturating_sub(1);
        for (k, p) in path.iter().enumerate() {
            if k % stride == 0 || k == last {
                traj.row(&[id.to_string(), real(ens.timestamps[k]), real(p[0]), real(p[1])]);
            }
        }
    }
    out.table("trajectories.csv", traj)?;

    let r = &outcome.report;
    let mut status = CsvTable::new(&["traj_id", "arm", "detector", "status"]);
    for (id, (rec, flag)) in r.records.iter().zip(&ens.flags).enumerate() {
        status.row(&[
            id.to_string(),
            rec.arm.as_str().into(),
            rec.detector.as_str().into(),
            flag.as_str().into(),
        ]);
    }
    out.table("trajectory_status.csv", status)?;

    let m = routing_analysis(r);
    let mut routing = CsvTable::new(&["arm", "D1", "D2", "lost", "fraction_D1", "fraction_D2"]);
    for arm in [Arm::P1, Arm::P2] {
        routing.row(&[
            arm.as_str().into(),
            m.count(arm, Detector::D1).to_string(),
            m.count(arm, Detector::D2).to_string(),
            m.count(arm, Detector::Lost).to_string(),
            real(m.fraction(arm, Detector::D1)),
            real(m.fraction(arm, Detector::D2)),
        ]);
    }
    out.table("routing.csv", routing)?;

    let int = |v: usize| Value::Integer(v as i64);
    report.insert("mode".into(), Value::String(choice.name().into()));
    if let Some(t_c) = choice.switch_time() {
        report.insert("switch_time".into(), Value::Float(t_c));
    }
    let (lo, hi) = layout.choice_window();
    report.insert("choice_window".into(), Value::Array(vec![Value::Float(lo), Value::Float(hi)]));
    report.insert("splitter_height".into(), Value::Float(height));
    report.insert("trajectories".into(), int(r.n));
    report.insert("count_d1".into(), int(r.n_d1));
    report.insert("count_d2".into(), int(r.n_d2));
    report.insert("count_lost".into(), int(r.n_lost));
    report.insert("fraction_d1".into(), Value::Float(r.fraction_d1()));
    report.insert("fraction_d2".into(), Value::Float(r.fraction_d2()));
    report.insert("fraction_lost".into(), Value::Float(r.fraction_lost()));
    report.insert("density_d1".into(), Value::Float(r.density_d1));
    report.insert("density_d2".into(), Value::Float(r.density_d2));
    report.insert("density_residual".into(), Value::Float(r.density_residual));
    report.insert("arm_fraction_p1".into(), Value::Float(r.arm_fraction(Arm::P1)));
    report.insert("tag_time".into(), Value::Float(outcome.tag_time));
    report.insert("norm_drift".into(), Value::Float(r.norm_drift));
    report.insert("end_time".into(), Value::Float(r.end_time));
    report.insert("untagged".into(), int(m.untagged));
    out.report("detector_report.toml", &report)?;
    Ok(())
}
