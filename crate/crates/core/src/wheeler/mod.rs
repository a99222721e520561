//! Delayed-choice Mach-Zehnder interferometer on the 2D grid propagator.
//!
//! Layout (all elements are slabs along the (1, 1) diagonal):
//!
//! ```text
//!            D1 (beam leaving BS2 along +y)
//!             ^
//!   M2 ------ BS2 --> D2 (beam leaving BS2 along +x)
//!    |         |
//!    P2        P1
//!    |         |
//!   BS1 ----- M1
//!    ^
//!  source (moving +x from the left)
//! ```
//!
//! P1 is the arm of the transmitted packet (the side `x > y` of the BS1
//! diagonal), P2 the reflected one.

mod calibrate;
mod config;
mod run;

use thiserror::Error;

use crate::analytic::GaussianPacket;
use crate::fields::PhysicalUnits;
use crate::gridprop::{GridError, GridSpec, GridWaveField, PotentialElement, PotentialSchedule, PotentialStage};
use crate::trajectories::SamplingError;

pub use calibrate::{calibrate_beam_splitter, splitter_transmission, Calibration};
pub use config::{
    ChoiceConfig, DetectorConfig, EnsembleConfig, GeometryConfig, GridConfig, ModeName,
    NumericsConfig, Sampling, ScenarioConfig, SourceConfig, UnitsConfig, DEFAULT_SCENARIO,
    QUICK_SCENARIO,
};
pub use run::{
    recombination_crossings, routing_analysis, run_scenario, Arm, Detector, DetectorReport,
    RoutingMatrix, RoutingRecord, ScenarioOutcome, StageSnapshot,
};

#[derive(Debug, Error)]
pub enum WheelerError {
    #[error("scenario configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(
        "switch time {t_c} lies outside the valid window ({lo:.4}, {hi:.4}); pick a time after \
         the packet has left BS1 and before it reaches the BS2 site"
    )]
    InvalidChoiceTime { t_c: f64, lo: f64, hi: f64 },
    #[error("beam-splitter calibration failed: {0}")]
    Calibration(String),
    #[error(
        "time cap {cap} reached with only {captured:.4} of the density in the detectors; raise \
         numerics.time_cap or check the geometry"
    )]
    TimeCapReached {
        cap: f64,
        captured: f64,
        partial: Box<ScenarioOutcome>,
    },
}

/// Axis-aligned half-open rectangle `[x.0, x.1) × [y.0, y.1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn contains(&self, p: &[f64; 2]) -> bool {
        p[0] >= self.x.0 && p[0] < self.x.1 && p[1] >= self.y.0 && p[1] < self.y.1
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.x.0 < o.x.1 && o.x.0 < self.x.1 && self.y.0 < o.y.1 && o.y.0 < self.y.1
    }
}

/// Source packet: isotropic Gaussian moving along +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePacket {
    pub center: [f64; 2],
    pub wavenumber: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerLayout {
    pub spec: GridSpec,
    pub units: PhysicalUnits,
    pub bs1: PotentialElement,
    pub bs2: PotentialElement,
    pub m1: PotentialElement,
    pub m2: PotentialElement,
    /// Arm length after snapping to a whole number of grid cells.
    pub arm_length: f64,
    pub source: SourcePacket,
    pub detector_d1: Rect,
    pub detector_d2: Rect,
}

/// Centroid kinematics of the packet along its folded path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub speed: f64,
    /// Path length from the source to BS1.
    pub to_bs1: f64,
    pub arm_length: f64,
}

impl Kinematics {
    pub fn sigma_t(&self, layout: &InterferometerLayout, t: f64) -> f64 {
        let s = layout.source.sigma;
        let r = layout.units.hbar * t / (2.0 * layout.units.mass * s * s);
        s * (1.0 + r * r).sqrt()
    }

    pub fn mirror_time(&self) -> f64 {
        (self.to_bs1 + self.arm_length) / self.speed
    }

    pub fn bs2_time(&self) -> f64 {
        (self.to_bs1 + 2.0 * self.arm_length) / self.speed
    }
}

impl InterferometerLayout {
    pub fn from_config(cfg: &ScenarioConfig, splitter_height: f64) -> Result<Self, WheelerError> {
        cfg.validate()?;
        let spec = GridSpec::square(cfg.grid.n, cfg.grid.lo, cfg.grid.hi)?;
        let units = PhysicalUnits::new(cfg.units.hbar, cfg.units.mass)
            .map_err(|e| WheelerError::Config(e.to_string()))?;
        let g = &cfg.geometry;
        let dx = spec.dx();
        let cells = (g.arm_length / dx).round().max(1.0);
        let l = cells * dx;
        let bs_len = [g.splitter_length, g.splitter_thickness];
        let m_len = [g.mirror_length, g.mirror_thickness];
        let c = l + cfg.detectors.margin;
        let layout = Self {
            spec,
            units,
            bs1: PotentialElement::barrier("bs1", [0.0, 0.0], bs_len, 45.0, splitter_height),
            bs2: PotentialElement::barrier("bs2", [l, l], bs_len, 45.0, splitter_height),
            m1: PotentialElement::wall("m1", [l, 0.0], m_len, 45.0, g.wall_height),
            m2: PotentialElement::wall("m2", [0.0, l], m_len, 45.0, g.wall_height),
            arm_length: l,
            source: SourcePacket {
                center: [-cfg.source.distance, 0.0],
                wavenumber: cfg.source.wavenumber,
                sigma: cfg.source.sigma,
            },
            detector_d1: Rect {
                x: (spec.x_min, c),
                y: (c, spec.y_max),
            },
            detector_d2: Rect {
                x: (c, spec.x_max),
                y: (spec.y_min, c),
            },
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), WheelerError> {
        let dx = self.spec.dx();
        if self.bs1.lengths[1] < 2.0 * dx {
            return Err(WheelerError::Config(format!(
                "splitter thickness {} is below two grid cells ({})",
                self.bs1.lengths[1],
                2.0 * dx
            )));
        }
        // Source → BS1 → M1 → BS2 against source → BS1 → M2 → BS2.
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let p1 = d(self.bs1.center, self.m1.center) + d(self.m1.center, self.bs2.center);
        let p2 = d(self.bs1.center, self.m2.center) + d(self.m2.center, self.bs2.center);
        if (p1 - p2).abs() > dx {
            return Err(WheelerError::Config(format!("arm paths differ by {} (> one cell)", (p1 - p2).abs())));
        }
        if self.detector_d1.overlaps(&self.detector_d2) {
            return Err(WheelerError::Config("detector regions overlap".into()));
        }
        for (name, r) in [("D1", &self.detector_d1), ("D2", &self.detector_d2)] {
            if !(r.x.0 < r.x.1 && r.y.0 < r.y.1) {
                return Err(WheelerError::Config(format!("detector {name} lies outside the grid")));
            }
        }
        for e in [&self.bs1, &self.bs2, &self.m1, &self.m2] {
            if !e.within(&self.spec) {
                return Err(WheelerError::Config(format!("element {} reaches outside the grid", e.label)));
            }
        }
        Ok(())
    }

    pub fn with_splitter_height(&self, h: f64) -> Self {
        let mut out = self.clone();
        out.bs1.height = h;
        out.bs2.height = h;
        out
    }

    pub fn kinematics(&self) -> Kinematics {
        Kinematics {
            speed: self.units.hbar * self.source.wavenumber / self.units.mass,
            to_bs1: self.bs1.center[0] - self.source.center[0],
            arm_length: self.arm_length,
        }
    }

    /// Valid switching window: from the end of BS1 transit (centroid four
    /// widths clear of the splitter slab) to the first arrival at the BS2
    /// site (centroid four widths short of it).
    pub fn choice_window(&self) -> (f64, f64) {
        let k = self.kinematics();
        let half = 0.5 * self.bs1.lengths[1];
        let gap = |s: f64| s / std::f64::consts::SQRT_2 - half;
        let after = |t: f64| gap(k.speed * t - k.to_bs1) - 4.0 * k.sigma_t(self, t);
        let before = |t: f64| gap(k.to_bs1 + 2.0 * k.arm_length - k.speed * t) - 4.0 * k.sigma_t(self, t);
        let lo = bisect(after, k.to_bs1 / k.speed, k.bs2_time());
        let hi = bisect(|t| -before(t), 0.0, k.bs2_time());
        (lo, hi)
    }

    /// Time at which the split packets are clear of the splitter by six
    /// widths; used for calibration and arm tagging.
    pub fn separation_time(&self) -> f64 {
        let k = self.kinematics();
        let half = 0.5 * self.bs1.lengths[1];
        let f = |t: f64| (k.speed * t - k.to_bs1) / std::f64::consts::SQRT_2 - half - 6.0 * k.sigma_t(self, t);
        bisect(f, k.to_bs1 / k.speed, 10.0 * k.bs2_time())
    }

    /// Initial field: the normalised source packet at `t = 0`.
    pub fn initial_field(&self) -> Result<GridWaveField, WheelerError> {
        let s = &self.source;
        let px = GaussianPacket::new(s.center[0], self.units.hbar * s.wavenumber, s.sigma, 1.0)
            .map_err(|e| WheelerError::Config(e.to_string()))?;
        let py = GaussianPacket::new(s.center[1], 0.0, s.sigma, 1.0)
            .map_err(|e| WheelerError::Config(e.to_string()))?;
        let mut f = GridWaveField::product_gaussian(self.spec, self.units, &px, &py, 0.0)?;
        f.normalize();
        Ok(f)
    }

    /// Initial density `|Ψ(r, 0)|²` in closed form.
    pub fn initial_density(&self, p: [f64; 2]) -> f64 {
        let s = &self.source;
        let r2 = (p[0] - s.center[0]).powi(2) + (p[1] - s.center[1]).powi(2);
        (-r2 / (2.0 * s.sigma * s.sigma)).exp() / (2.0 * std::f64::consts::PI * s.sigma * s.sigma)
    }
}

/// Root of an increasing function on `[a, b]` (clamped to the ends).
fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    if f(a) >= 0.0 {
        return a;
    }
    if f(b) <= 0.0 {
        return b;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Which configuration is present, and when it changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChoiceSchedule {
    Open,
    Closed,
    DelayedInsert(f64),
    DelayedRemove(f64),
}

impl ChoiceSchedule {
    pub fn from_config(c: &ChoiceConfig, layout: &InterferometerLayout) -> Self {
        let t_c = if c.switch_time == 0.0 {
            let (lo, hi) = layout.choice_window();
            0.5 * (lo + hi)
        } else {
            c.switch_time
        };
        match c.mode {
            ModeName::Open => Self::Open,
            ModeName::Closed => Self::Closed,
            ModeName::DelayedInsert => Self::DelayedInsert(t_c),
            ModeName::DelayedRemove => Self::DelayedRemove(t_c),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Open => "open",
            Self::Closed => "closed",
            Self::DelayedInsert(_) => "delayed_insert",
            Self::DelayedRemove(_) => "delayed_remove",
        }
    }

    pub fn switch_time(&self) -> Option<f64> {
        match self {
            Self::DelayedInsert(t) | Self::DelayedRemove(t) => Some(*t),
            _ => None,
        }
    }

    /// Whether BS2 is present at recombination.
    pub fn closed_at_recombination(&self) -> bool {
        matches!(self, Self::Closed | Self::DelayedInsert(_))
    }

    pub fn validate(&self, layout: &InterferometerLayout) -> Result<(), WheelerError> {
        if let Some(t_c) = self.switch_time() {
            let (lo, hi) = layout.choice_window();
            if !(t_c > lo && t_c < hi) {
                return Err(WheelerError::InvalidChoiceTime { t_c, lo, hi });
            }
        }
        Ok(())
    }
}

/// Potential schedule for a configuration choice.
pub fn build_schedule(layout: &InterferometerLayout, choice: ChoiceSchedule) -> Result<PotentialSchedule, WheelerError> {
    choice.validate(layout)?;
    let open = vec![layout.m1.clone(), layout.m2.clone(), layout.bs1.clone()];
    let mut closed = open.clone();
    closed.push(layout.bs2.clone());
    let inf = f64::INFINITY;
    let stages = match choice {
        ChoiceSchedule::Open => vec![PotentialStage::new(0.0, inf, open)],
        ChoiceSchedule::Closed => vec![PotentialStage::new(0.0, inf, closed)],
        ChoiceSchedule::DelayedInsert(t) => {
            vec![PotentialStage::new(0.0, t, open), PotentialStage::new(t, inf, closed)]
        }
        ChoiceSchedule::DelayedRemove(t) => {
            vec![PotentialStage::new(0.0, t, closed), PotentialStage::new(t, inf, open)]
        }
    };
    Ok(PotentialSchedule::new(stages)?)
}
