//! Piecewise-constant-in-time potentials built from rotated rectangles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GridError, GridSpec};

/// `(cos θ, sin θ)` for `θ` in degrees, exact at multiples of 45°.
///
/// Exactness keeps diagonal layouts bitwise symmetric under `x ↔ y`.
pub fn exact_cos_sin(deg: f64) -> (f64, f64) {
    let q = deg / 45.0;
    if q == q.round() && q.abs() < 1e9 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        return match (q as i64).rem_euclid(8) {
            0 => (1.0, 0.0),
            1 => (h, h),
            2 => (0.0, 1.0),
            3 => (-h, h),
            4 => (-1.0, 0.0),
            5 => (-h, -h),
            6 => (0.0, -1.0),
            _ => (h, -h),
        };
    }
    let r = deg.to_radians();
    (r.cos(), r.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Barrier,
    Wall,
}

/// A rectangle of constant height. `lengths[0]` runs along the direction at
/// `angle_deg` from the x axis, `lengths[1]` across it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialElement {
    pub label: String,
    pub kind: ElementKind,
    pub center: [f64; 2],
    pub lengths: [f64; 2],
    pub angle_deg: f64,
    pub height: f64,
}

impl PotentialElement {
    pub fn barrier(label: &str, center: [f64; 2], lengths: [f64; 2], angle_deg: f64, height: f64) -> Self {
        Self {
            label: label.to_string(),
            kind: ElementKind::Barrier,
            center,
            lengths,
            angle_deg,
            height,
        }
    }

    /// A mirror-like element; `wall_height` is the configured hard-wall level.
    pub fn wall(label: &str, center: [f64; 2], lengths: [f64; 2], angle_deg: f64, wall_height: f64) -> Self {
        Self {
            kind: ElementKind::Wall,
            ..Self::barrier(label, center, lengths, angle_deg, wall_height)
        }
    }

    /// Sharp-edged membership of the point `(x, y)`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (c, s) = exact_cos_sin(self.angle_deg);
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        u.abs() <= 0.5 * self.lengths[0] && v.abs() <= 0.5 * self.lengths[1]
    }

    /// Whether every corner lies inside the grid extent.
    pub fn within(&self, spec: &GridSpec) -> bool {
        let (c, s) = exact_cos_sin(self.angle_deg);
        let (a, b) = (0.5 * self.lengths[0], 0.5 * self.lengths[1]);
        [(a, b), (a, -b), (-a, b), (-a, -b)].iter().all(|&(u, v)| {
            let x = self.center[0] + u * c - v * s;
            let y = self.center[1] + u * s + v * c;
            x >= spec.x_min && x <= spec.x_max && y >= spec.y_min && y <= spec.y_max
        })
    }

    fn validate(&self) -> Result<(), GridError> {
        let ok = self.height.is_finite()
            && self.center.iter().all(|v| v.is_finite())
            && self.lengths.iter().all(|v| v.is_finite() && *v >= 0.0)
            && self.angle_deg.is_finite();
        if !ok {
            return Err(GridError::InvalidSchedule(format!(
                "element '{}' has non-finite or negative geometry/height",
                self.label
            )));
        }
        Ok(())
    }
}

/// Elements active on `[t_start, t_end)`; `t_end` may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialStage {
    pub t_start: f64,
    pub t_end: f64,
    pub elements: Vec<PotentialElement>,
}

impl PotentialStage {
    pub fn new(t_start: f64, t_end: f64, elements: Vec<PotentialElement>) -> Self {
        Self {
            t_start,
            t_end,
            elements,
        }
    }

    pub fn has_element(&self, label: &str) -> bool {
        self.elements.iter().any(|e| e.label == label)
    }

    /// Labels of elements reaching outside the grid.
    pub fn outside_extent(&self, spec: &GridSpec) -> Vec<String> {
        self.elements
            .iter()
            .filter(|e| !e.within(spec))
            .map(|e| e.label.clone())
            .collect()
    }
}

/// Ordered, pairwise disjoint stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSchedule {
    stages: Vec<PotentialStage>,
}

impl PotentialSchedule {
    pub fn new(stages: Vec<PotentialStage>) -> Result<Self, GridError> {
        if stages.is_empty() {
            return Err(GridError::InvalidSchedule("a schedule needs at least one stage".into()));
        }
        for (i, s) in stages.iter().enumerate() {
            if s.t_start.is_nan() || s.t_end.is_nan() || !(s.t_end > s.t_start) {
                return Err(GridError::InvalidSchedule(format!(
                    "stage {i} has an empty interval [{}, {})",
                    s.t_start, s.t_end
                )));
            }
            for e in &s.elements {
                e.validate()?;
            }
            if i > 0 && s.t_start < stages[i - 1].t_end {
                return Err(GridError::InvalidSchedule(format!(
                    "stage {i} overlaps or precedes stage {}",
                    i - 1
                )));
            }
        }
        Ok(Self { stages })
    }

    /// One stage on `[0, ∞)`.
    pub fn single(elements: Vec<PotentialElement>) -> Self {
        Self {
            stages: vec![PotentialStage::new(0.0, f64::INFINITY, elements)],
        }
    }

    pub fn stages(&self) -> &[PotentialStage] {
        &self.stages
    }

    /// Index of the stage containing `t`. Times within `tol` below a stage
    /// start count as inside it, so accumulated step times that land a hair
    /// short of a switch still pick the new stage.
    pub fn stage_at(&self, t: f64, tol: f64) -> Option<usize> {
        self.stages
            .iter()
            .position(|s| t + tol >= s.t_start && t + tol < s.t_end)
    }

    /// Verifies that `[t0, t1)` is covered without gaps.
    pub fn check_coverage(&self, t0: f64, t1: f64, tol: f64) -> Result<(), GridError> {
        let mut t = t0;
        while t < t1 - tol {
            let i = self.stage_at(t, tol).ok_or(GridError::ScheduleGap { t })?;
            t = self.stages[i].t_end;
        }
        Ok(())
    }
}

/// Sum of element heights at every grid point (row-major).
pub fn rasterize_potential(stage: &PotentialStage, spec: &GridSpec) -> Vec<f64> {
    let mut out = vec![0.0; spec.len()];
    if stage.elements.is_empty() {
        return out;
    }
    out.par_chunks_mut(spec.nx).enumerate().for_each(|(iy, row)| {
        let y = spec.y(iy);
        for (ix, v) in row.iter_mut().enumerate() {
            let x = spec.x(ix);
            for e in &stage.elements {
                if e.contains(x, y) {
                    *v += e.height;
                }
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::square(64, -4.0, 4.0).unwrap()
    }

    #[test]
    fn empty_stage_rasterizes_to_zero() {
        let v = rasterize_potential(&PotentialStage::new(0.0, 1.0, vec![]), &spec());
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn half_domain_rectangle() {
        let s = spec();
        // Covers x in [-4, 0) exactly: grid points sit at multiples of 0.125.
        let e = PotentialElement::barrier("half", [-2.0625, 0.0], [3.875, 20.0], 0.0, 10.0);
        let v = rasterize_potential(&PotentialStage::new(0.0, 1.0, vec![e]), &s);
        for iy in 0..s.ny {
            for ix in 0..s.nx {
                let want = if s.x(ix) < 0.0 { 10.0 } else { 0.0 };
                assert_eq!(v[s.index(ix, iy)], want, "({ix},{iy})");
            }
        }
    }

    #[test]
    fn diagonal_band_width() {
        let s = spec();
        let thickness = 0.5;
        let e = PotentialElement::barrier("bs", [0.0, 0.0], [100.0, thickness], 45.0, 3.0);
        let v = rasterize_potential(&PotentialStage::new(0.0, 1.0, vec![e]), &s);
        let h = 0.5 * thickness;
        let cell = s.dx();
        for iy in 0..s.ny {
            for ix in 0..s.nx {
                // Distance to the line y = x.
                let d = (s.y(iy) - s.x(ix)).abs() * std::f64::consts::FRAC_1_SQRT_2;
                let on = v[s.index(ix, iy)] != 0.0;
                if d < h - cell {
                    assert!(on);
                }
                if d > h + cell {
                    assert!(!on);
                }
            }
        }
    }

    #[test]
    fn diagonal_raster_is_swap_symmetric() {
        let s = spec();
        let stage = PotentialStage::new(
            0.0,
            1.0,
            vec![
                PotentialElement::wall("m1", [2.0, 0.0], [2.0, 0.3], 45.0, 50.0),
                PotentialElement::wall("m2", [0.0, 2.0], [2.0, 0.3], 45.0, 50.0),
                PotentialElement::barrier("bs", [0.0, 0.0], [2.0, 0.2], 45.0, 5.0),
            ],
        );
        let v = rasterize_potential(&stage, &s);
        for iy in 0..s.ny {
            for ix in 0..s.nx {
                assert_eq!(v[s.index(ix, iy)], v[s.index(iy, ix)]);
            }
        }
    }

    #[test]
    fn exact_angles() {
        assert_eq!(exact_cos_sin(90.0), (0.0, 1.0));
        assert_eq!(exact_cos_sin(-45.0), exact_cos_sin(315.0));
        let (c, s) = exact_cos_sin(30.0);
        assert!((c - 3f64.sqrt() / 2.0).abs() < 1e-15 && (s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation_and_lookup() {
        let a = PotentialStage::new(0.0, 1.0, vec![]);
        let b = PotentialStage::new(1.0, f64::INFINITY, vec![]);
        let sch = PotentialSchedule::new(vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(sch.stage_at(0.5, 0.0), Some(0));
        assert_eq!(sch.stage_at(1.0 - 1e-15, 1e-12), Some(1));
        assert!(sch.check_coverage(0.0, 5.0, 1e-12).is_ok());
        assert!(PotentialSchedule::new(vec![b.clone(), a.clone()]).is_err());
        let gap = PotentialSchedule::new(vec![PotentialStage::new(0.0, 0.5, vec![]), b]).unwrap();
        assert!(matches!(gap.check_coverage(0.0, 2.0, 1e-12), Err(GridError::ScheduleGap { .. })));
        assert!(PotentialSchedule::new(vec![]).is_err());
    }

    #[test]
    fn element_extent_check() {
        let s = spec();
        let inside = PotentialElement::barrier("a", [0.0, 0.0], [1.0, 1.0], 45.0, 1.0);
        let outside = PotentialElement::barrier("b", [3.9, 0.0], [1.0, 1.0], 0.0, 1.0);
        let st = PotentialStage::new(0.0, 1.0, vec![inside, outside]);
        assert_eq!(st.outside_extent(&s), vec!["b".to_string()]);
    }
}
