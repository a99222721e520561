//! Scenario runs: field and trajectories in lockstep, detector statistics
//! and arm-to-detector routing.

use super::config::{NumericsConfig, Sampling};
use super::{build_schedule, ChoiceSchedule, InterferometerLayout, WheelerError};
use crate::gridprop::{GridWaveField, ScheduledRun, StabilityWarning, StepInterpolator, TrajectoryStepper};
use crate::trajectories::{
    check_non_crossing, sample_initial_conditions_2d, sample_initial_conditions_2d_stratified,
    Boundary, CrossingReport, IntegratorConfig, Point, TrajectoryEnsemble,
};

/// Interferometer arm a trajectory took after BS1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    /// Transmitted arm, via M1.
    P1,
    /// Reflected arm, via M2.
    P2,
    /// No position stored at tagging time.
    Unknown,
}

impl Arm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::P1 => "P1",
            Self::P2 => "P2",
            Self::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    D1,
    D2,
    Lost,
}

impl Detector {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::D1 => "D1",
            Self::D2 => "D2",
            Self::Lost => "lost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoutingRecord {
    pub arm: Arm,
    pub detector: Detector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorReport {
    pub n: usize,
    pub n_d1: usize,
    pub n_d2: usize,
    pub n_lost: usize,
    /// Probability inside each detector region at the end of the run.
    pub density_d1: f64,
    pub density_d2: f64,
    /// Probability outside both detectors.
    pub density_residual: f64,
    /// Largest relative norm change seen at the periodic checks.
    pub norm_drift: f64,
    pub end_time: f64,
    pub records: Vec<RoutingRecord>,
}

impl DetectorReport {
    fn frac(&self, k: usize) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            k as f64 / self.n as f64
        }
    }

    pub fn fraction_d1(&self) -> f64 {
        self.frac(self.n_d1)
    }

    pub fn fraction_d2(&self) -> f64 {
        self.frac(self.n_d2)
    }

    pub fn fraction_lost(&self) -> f64 {
        self.frac(self.n_lost)
    }

    /// Fraction of trajectories tagged with `arm`.
    pub fn arm_fraction(&self, arm: Arm) -> f64 {
        self.frac(self.records.iter().filter(|r| r.arm == arm).count())
    }
}

/// Field at one of the five reported stages of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSnapshot {
    pub label: &'static str,
    pub requested: f64,
    pub stage: usize,
    pub field: GridWaveField,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub choice: ChoiceSchedule,
    pub report: DetectorReport,
    pub snapshots: Vec<StageSnapshot>,
    pub ensemble: TrajectoryEnsemble<2>,
    /// Time at which arms are tagged.
    pub tag_time: f64,
    pub warnings: Vec<StabilityWarning>,
}

/// Counts of (arm P1/P2) × (detector D1/D2/lost).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoutingMatrix {
    /// `counts[arm][detector]`, arm 0 = P1, 1 = P2; detector 0 = D1, 1 = D2, 2 = lost.
    pub counts: [[usize; 3]; 2],
    pub untagged: usize,
}

impl RoutingMatrix {
    fn row(arm: Arm) -> Option<usize> {
        match arm {
            Arm::P1 => Some(0),
            Arm::P2 => Some(1),
            Arm::Unknown => None,
        }
    }

    fn col(d: Detector) -> usize {
        match d {
            Detector::D1 => 0,
            Detector::D2 => 1,
            Detector::Lost => 2,
        }
    }

    pub fn count(&self, arm: Arm, d: Detector) -> usize {
        Self::row(arm).map_or(0, |r| self.counts[r][Self::col(d)])
    }

    /// Fraction of the trajectories of `arm` that end at `d` (0 for an empty arm).
    pub fn fraction(&self, arm: Arm, d: Detector) -> f64 {
        let Some(r) = Self::row(arm) else { return 0.0 };
        let total: usize = self.counts[r].iter().sum();
        if total == 0 {
            0.0
        } else {
            self.counts[r][Self::col(d)] as f64 / total as f64
        }
    }
}

/// Arm-to-detector matrix of a run.
pub fn routing_analysis(report: &DetectorReport) -> RoutingMatrix {
    let mut m = RoutingMatrix::default();
    for r in &report.records {
        match RoutingMatrix::row(r.arm) {
            Some(i) => m.counts[i][RoutingMatrix::col(r.detector)] += 1,
            None => m.untagged += 1,
        }
    }
    m
}

/// Crossings of the recombination diagonal (through the BS2 site, along
/// (1, 1)) from `t_from` onwards.
pub fn recombination_crossings(
    ensemble: &TrajectoryEnsemble<2>,
    layout: &InterferometerLayout,
    t_from: f64,
) -> CrossingReport {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = layout.bs2.center;
    let boundary = Boundary {
        normal: [h, -h],
        offset: h * c[0] - h * c[1],
    };
    let i0 = ensemble.nearest_index(t_from).unwrap_or(0);
    let mut tail = TrajectoryEnsemble::empty(ensemble.timestamps[i0.min(ensemble.timestamps.len())..].to_vec(), ensemble.seed);
    tail.positions = ensemble
        .positions
        .iter()
        .map(|p| p.get(i0..).map(|s| s.to_vec()).unwrap_or_default())
        .collect();
    tail.flags = ensemble.flags.clone();
    check_non_crossing(&tail, &boundary)
}

fn sample_initials(
    layout: &InterferometerLayout,
    n: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<Vec<Point<2>>, WheelerError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let s = &layout.source;
    let w = 6.0 * s.sigma;
    let rect = [(s.center[0] - w, s.center[0] + w), (s.center[1] - w, s.center[1] + w)];
    let rho = |p: Point<2>| layout.initial_density(p);
    Ok(match sampling {
        Sampling::Stratified => sample_initial_conditions_2d_stratified(rho, n, seed, rect, 9)?,
        Sampling::Rejection => {
            let peak = layout.initial_density(s.center);
            sample_initial_conditions_2d(rho, n, seed, rect, peak)?
        }
    })
}

/// Propagates one configuration until `capture_fraction` of the density is
/// inside the detectors, advancing `n_trajectories` Bohmian trajectories
/// alongside the field.
pub fn run_scenario(
    layout: &InterferometerLayout,
    choice: ChoiceSchedule,
    n_trajectories: usize,
    seed: u64,
    numerics: &NumericsConfig,
    sampling: Sampling,
) -> Result<ScenarioOutcome, WheelerError> {
    let schedule = build_schedule(layout, choice)?;
    let field = layout.initial_field()?;
    let spec = field.spec;
    let units = field.units;
    let dt = numerics.dt;
    let norm0 = field.norm();
    let mut run = ScheduledRun::new(field, schedule, dt)?;
    let config = IntegratorConfig {
        dt,
        node_threshold: numerics.node_threshold,
        max_substep_halvings: numerics.max_substep_halvings,
    };
    config
        .validate()
        .map_err(|e| WheelerError::Config(e.to_string()))?;
    let initials = sample_initials(layout, n_trajectories, seed, sampling)?;
    let mut stepper = TrajectoryStepper::new(&initials, 0.0, &spec, config);

    let k = layout.kinematics();
    let (window_lo, _) = layout.choice_window();
    let stages = [
        ("initial", 0.0),
        ("bs1_split", window_lo),
        ("mirror", k.mirror_time()),
        ("bs2_site", k.bs2_time()),
    ];
    let mut snapshots: Vec<StageSnapshot> = Vec::new();
    let take = |run: &ScheduledRun, label: &'static str, requested: f64, snaps: &mut Vec<StageSnapshot>| -> Result<(), WheelerError> {
        snaps.push(StageSnapshot {
            label,
            requested,
            stage: run.stage_at(run.time())?,
            field: run.field().clone(),
        });
        Ok(())
    };
    take(&run, stages[0].0, stages[0].1, &mut snapshots)?;

    let (d1, d2) = (layout.detector_d1, layout.detector_d2);
    let captured = |f: &GridWaveField| f.mass_where(|x, y| d1.contains(&[x, y]) || d2.contains(&[x, y]));
    let mut steps = StepInterpolator::new(run.field());
    let mut norm_drift: f64 = 0.0;
    let mut step: u64 = 0;
    let mut capped = None;
    loop {
        let t = run.time();
        if t >= numerics.time_cap - 1e-9 * dt {
            capped = Some(captured(run.field()) / run.field().norm());
            break;
        }
        run.step()?;
        step += 1;
        steps.push(run.field());
        stepper.advance(&steps.sampler(units));
        for &(label, req) in &stages[1..] {
            if (req / dt).round() as u64 == step {
                take(&run, label, req, &mut snapshots)?;
            }
        }
        if step.is_multiple_of(numerics.check_interval as u64) {
            let norm = run.field().norm();
            if !norm.is_finite() {
                return Err(WheelerError::Grid(crate::gridprop::GridError::NonFinite { t: run.time() }));
            }
            norm_drift = norm_drift.max(((norm - norm0) / norm0).abs());
            if captured(run.field()) >= numerics.capture_fraction * norm {
                break;
            }
        }
    }
    let end = run.field();
    let norm = end.norm();
    norm_drift = norm_drift.max(((norm - norm0) / norm0).abs());
    take(&run, "final", end.time, &mut snapshots)?;

    let ensemble = stepper.into_ensemble(seed);
    let tag_time = layout.separation_time();
    let tag_idx = ensemble.nearest_index(tag_time).unwrap_or(0);
    let bc = layout.bs1.center;
    let records: Vec<RoutingRecord> = ensemble
        .positions
        .iter()
        .zip(&ensemble.flags)
        .map(|(path, flag)| {
            let arm = match path.get(tag_idx) {
                Some(p) if (p[0] - bc[0]) - (p[1] - bc[1]) > 0.0 => Arm::P1,
                Some(_) => Arm::P2,
                None => Arm::Unknown,
            };
            let last = path.last().expect("trajectories start with one point");
            let detector = if !flag.is_complete() {
                Detector::Lost
            } else if d1.contains(last) {
                Detector::D1
            } else if d2.contains(last) {
                Detector::D2
            } else {
                Detector::Lost
            };
            RoutingRecord { arm, detector }
        })
        .collect();
    let count = |d: Detector| records.iter().filter(|r| r.detector == d).count();
    let report = DetectorReport {
        n: records.len(),
        n_d1: count(Detector::D1),
        n_d2: count(Detector::D2),
        n_lost: count(Detector::Lost),
        density_d1: end.mass_where(|x, y| d1.contains(&[x, y])),
        density_d2: end.mass_where(|x, y| d2.contains(&[x, y])),
        density_residual: end.mass_where(|x, y| !d1.contains(&[x, y]) && !d2.contains(&[x, y])),
        norm_drift,
        end_time: end.time,
        records,
    };
    let outcome = ScenarioOutcome {
        choice,
        report,
        snapshots,
        ensemble,
        tag_time,
        warnings: run.warnings().to_vec(),
    };
    match capped {
        Some(c) => Err(WheelerError::TimeCapReached {
            cap: numerics.time_cap,
            captured: c,
            partial: Box::new(outcome),
        }),
        None => Ok(outcome),
    }
}
