//! Scenario configuration document.

use serde::{Deserialize, Serialize};

use super::WheelerError;

/// The shipped default scenario.
pub const DEFAULT_SCENARIO: &str = include_str!("../../scenarios/wheeler_default.toml");
/// A small, fast variant used for smoke and determinism checks.
pub const QUICK_SCENARIO: &str = include_str!("../../scenarios/wheeler_quick.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsConfig {
    pub hbar: f64,
    pub mass: f64,
}

/// Square grid `n × n` over `[lo, hi]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Packet centred at `(-distance, 0)` with mean wavenumber `wavenumber`
/// along +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub distance: f64,
    pub wavenumber: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub arm_length: f64,
    pub splitter_thickness: f64,
    pub splitter_length: f64,
    /// Zero requests calibration to 50% transmission.
    pub splitter_height: f64,
    pub mirror_thickness: f64,
    pub mirror_length: f64,
    pub wall_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Distance beyond the recombination point where the detectors begin.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub dt: f64,
    /// Stop once this fraction of the density sits inside the detectors.
    pub capture_fraction: f64,
    pub time_cap: f64,
    pub node_threshold: f64,
    pub max_substep_halvings: u32,
    /// Target `|T − 0.5|` for the splitter calibration.
    pub calibration_tolerance: f64,
    /// Steps between capture and norm checks.
    pub check_interval: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Stratified,
    Rejection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub trajectories: usize,
    pub seed: u64,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Open,
    Closed,
    DelayedInsert,
    DelayedRemove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceConfig {
    pub mode: ModeName,
    /// Switching time for the delayed modes; zero selects the middle of the
    /// valid window.
    pub switch_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub units: UnitsConfig,
    pub grid: GridConfig,
    pub source: SourceConfig,
    pub geometry: GeometryConfig,
    pub detectors: DetectorConfig,
    pub numerics: NumericsConfig,
    pub ensemble: EnsembleConfig,
    pub choice: ChoiceConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_SCENARIO).expect("shipped scenario parses")
    }
}

impl ScenarioConfig {
    pub fn quick() -> Self {
        Self::from_toml_str(QUICK_SCENARIO).expect("shipped scenario parses")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, WheelerError> {
        let cfg: Self = toml::from_str(s).map_err(|e| WheelerError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), WheelerError> {
        let bad = |m: String| Err(WheelerError::Config(m));
        let pos = |name: &str, v: f64| -> Result<(), WheelerError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(WheelerError::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("units.hbar", self.units.hbar)?;
        pos("units.mass", self.units.mass)?;
        if !(self.grid.hi > self.grid.lo) {
            return bad("grid.hi must exceed grid.lo".into());
        }
        pos("source.distance", self.source.distance)?;
        pos("source.wavenumber", self.source.wavenumber)?;
        pos("source.sigma", self.source.sigma)?;
        pos("geometry.arm_length", self.geometry.arm_length)?;
        pos("geometry.splitter_thickness", self.geometry.splitter_thickness)?;
        pos("geometry.splitter_length", self.geometry.splitter_length)?;
        pos("geometry.mirror_thickness", self.geometry.mirror_thickness)?;
        pos("geometry.mirror_length", self.geometry.mirror_length)?;
        pos("geometry.wall_height", self.geometry.wall_height)?;
        if !(self.geometry.splitter_height >= 0.0 && self.geometry.splitter_height.is_finite()) {
            return bad("geometry.splitter_height must be >= 0 (0 = calibrate)".into());
        }
        pos("detectors.margin", self.detectors.margin)?;
        pos("numerics.dt", self.numerics.dt)?;
        pos("numerics.time_cap", self.numerics.time_cap)?;
        pos("numerics.calibration_tolerance", self.numerics.calibration_tolerance)?;
        let cf = self.numerics.capture_fraction;
        if !(0.99..1.0).contains(&cf) {
            return bad(format!("numerics.capture_fraction must lie in [0.99, 1), got {cf}"));
        }
        let nt = self.numerics.node_threshold;
        if !(nt > 0.0 && nt < 1.0) {
            return bad(format!("numerics.node_threshold must lie in (0, 1), got {nt}"));
        }
        if self.numerics.check_interval == 0 {
            return bad("numerics.check_interval must be at least 1".into());
        }
        if !(self.choice.switch_time >= 0.0 && self.choice.switch_time.is_finite()) {
            return bad("choice.switch_time must be >= 0 (0 = middle of the valid window)".into());
        }
        Ok(())
    }
}
