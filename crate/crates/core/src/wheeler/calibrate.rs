//! Beam-splitter height tuned for 50% transmission.
//!
//! The splitter is calibrated with the real 45° geometry on the scenario
//! grid, so rasterisation and splitting-error bias are absorbed into the
//! height.

use super::{InterferometerLayout, WheelerError};
use crate::gridprop::{propagate, PotentialSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub height: f64,
    pub transmission: f64,
    /// Every `(height, transmission)` pair evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Probability carried across BS1 (onto the `x > y` side) once the split
/// packets have cleared the splitter, with BS1 alone at `height`.
pub fn splitter_transmission(layout: &InterferometerLayout, height: f64, dt: f64) -> Result<f64, WheelerError> {
    let field = layout.initial_field()?;
    let mut bs = layout.bs1.clone();
    bs.height = height;
    let (cx, cy) = (bs.center[0], bs.center[1]);
    let schedule = PotentialSchedule::single(vec![bs]);
    let (end, _) = propagate(field, &schedule, layout.separation_time(), dt, &[])?;
    Ok(end.mass_where(|x, y| (x - cx) - (y - cy) > 0.0) / end.norm())
}

fn logit(t: f64) -> f64 {
    (t / (1.0 - t)).ln()
}

/// Bracketed search for the splitter height giving `|T − 0.5| ≤ tolerance`.
///
/// The bracket is `[0, wall_height]`; a barrier as tall as the mirrors must
/// reflect more than half the packet. Steps are secant updates of
/// `logit T` against `ln height` through the two latest evaluations (close
/// to linear for thin barriers), kept strictly inside the current bracket.
pub fn calibrate_beam_splitter(
    layout: &InterferometerLayout,
    wall_height: f64,
    dt: f64,
    tolerance: f64,
) -> Result<Calibration, WheelerError> {
    if !(tolerance > 0.0 && tolerance < 0.5) {
        return Err(WheelerError::Calibration(format!("tolerance must lie in (0, 0.5), got {tolerance}")));
    }
    let u = layout.units;
    let mut evaluations = Vec::new();
    let eval = |h: f64, ev: &mut Vec<(f64, f64)>| -> Result<f64, WheelerError> {
        let t = splitter_transmission(layout, h, dt)?;
        ev.push((h, t));
        Ok(t)
    };
    let t_wall = eval(wall_height, &mut evaluations)?;
    if t_wall >= 0.5 - tolerance {
        return Err(WheelerError::Calibration(format!(
            "even height {wall_height} transmits {t_wall:.4}; the splitter is too thin for this packet energy"
        )));
    }
    // Thin-barrier estimate: a delta of strength h·a transmits half at h·a = ħ²k_n/m.
    let k_n = layout.source.wavenumber * std::f64::consts::FRAC_1_SQRT_2;
    let guess = (u.hbar * u.hbar * k_n / (u.mass * layout.bs1.lengths[1])).min(0.5 * wall_height);
    // (height, transmission): lo transmits more than half, hi less.
    let mut lo = (0.0, 1.0);
    let mut hi = (wall_height, t_wall);
    let mut prev: Option<(f64, f64)> = None;
    let mut h = guess;
    for _ in 0..40 {
        let t = eval(h, &mut evaluations)?;
        if (t - 0.5).abs() <= tolerance {
            return Ok(Calibration {
                height: h,
                transmission: t,
                evaluations,
            });
        }
        if t > 0.5 {
            lo = (h, t);
        } else {
            hi = (h, t);
        }
        // Secant through the two latest evaluations, or through the bracket
        // end that has a finite log height.
        let other = prev.unwrap_or(hi);
        prev = Some((h, t));
        let (ka, kb) = (h.ln(), logit(t));
        let (la, lb) = (other.0.ln(), logit(other.1));
        let next = (ka - kb * (la - ka) / (lb - kb)).exp();
        // Geometric midpoint when the secant leaves the bracket.
        let inner = |x: f64| x > lo.0 + 1e-3 * (hi.0 - lo.0) && x < hi.0 - 1e-3 * (hi.0 - lo.0);
        h = if next.is_finite() && inner(next) {
            next
        } else if lo.0 > 0.0 {
            (lo.0 * hi.0).sqrt()
        } else {
            0.5 * hi.0
        };
    }
    Err(WheelerError::Calibration(format!(
        "no height within {tolerance} of 50% after {} evaluations",
        evaluations.len()
    )))
}
