//! Closed-form free Gaussian packets and their coherent superpositions.
//!
//! A packet released at `x₀` with momentum `p₀` and width `σ₀` evolves as
//!
//! ```text
//! g(x,t) = (2πσ₀²)^{-1/4} (σ̃_t/σ₀)^{-1/2}
//!          exp[−(x−x₀−p₀t/m)²/(4σ₀σ̃_t) + i p₀(x−x₀)/ħ − i p₀²t/(2mħ)]
//! σ̃_t   = σ₀ (1 + iħt/(2mσ₀²))
//! ```
//!
//! Superpositions are evaluated in a log-scaled form so that ratios such as
//! `Ψ'/Ψ` stay accurate far out in the Gaussian tails.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::fields::{PhysicalUnits, WaveSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("barrier width diverges at t = {t} (zero momentum at t = 0)")]
    SingularTime { t: f64 },
    #[error("superposition has zero norm")]
    ZeroNorm,
}

/// Complex width `σ̃_t` of a freely spreading packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexWidth {
    pub value: Complex64,
}

impl ComplexWidth {
    pub fn at(sigma0: f64, t: f64, units: &PhysicalUnits) -> Self {
        let rate = units.hbar / (2.0 * units.mass * sigma0 * sigma0);
        Self {
            value: Complex64::new(sigma0, sigma0 * rate * t),
        }
    }

    /// Real width `σ_t = |σ̃_t|`.
    pub fn sigma_t(&self) -> f64 {
        self.value.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub center0: f64,
    pub momentum0: f64,
    pub sigma0: f64,
    pub norm_weight: f64,
}

impl GaussianPacket {
    pub fn new(
        center0: f64,
        momentum0: f64,
        sigma0: f64,
        norm_weight: f64,
    ) -> Result<Self, AnalyticError> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!(
                "sigma0 must be positive, got {sigma0}"
            )));
        }
        if !(norm_weight > 0.0 && norm_weight.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!(
                "norm_weight must be positive, got {norm_weight}"
            )));
        }
        if !center0.is_finite() || !momentum0.is_finite() {
            return Err(AnalyticError::InvalidParameter(
                "center and momentum must be finite".into(),
            ));
        }
        Ok(Self {
            center0,
            momentum0,
            sigma0,
            norm_weight,
        })
    }

    pub fn width(&self, t: f64, units: &PhysicalUnits) -> ComplexWidth {
        ComplexWidth::at(self.sigma0, t, units)
    }

    pub fn centroid(&self, t: f64, units: &PhysicalUnits) -> f64 {
        self.center0 + self.momentum0 * t / units.mass
    }

    /// Log of the unit-norm packet amplitude together with `g'/g` and `g''/g`.
    fn log_terms(&self, x: f64, t: f64, units: &PhysicalUnits) -> (Complex64, Complex64, Complex64) {
        let s0 = self.sigma0;
        let st = self.width(t, units).value;
        let hbar = units.hbar;
        let p = self.momentum0;
        let shift = x - self.centroid(t, units);
        let denom = 4.0 * s0 * st;
        let i = Complex64::i();

        let exponent = -(shift * shift) / denom + i * (p * (x - self.center0) / hbar)
            - i * (p * p * t / (2.0 * units.mass * hbar));
        let prefactor = -0.25 * (2.0 * PI * s0 * s0).ln() - 0.5 * (st / s0).ln();
        let log_g = exponent + prefactor;

        let d1 = -(2.0 * shift) / denom + i * (p / hbar);
        let d2 = d1 * d1 - 2.0 / denom;
        (log_g, d1, d2)
    }

    /// Unit-norm amplitude (the weight is not applied).
    pub fn amplitude(&self, x: f64, t: f64, units: &PhysicalUnits) -> Complex64 {
        self.log_terms(x, t, units).0.exp()
    }
}

/// Scaled superposition data at one point: `Ψ = e^{scale}·sum0`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledEvaluation {
    pub scale: f64,
    pub sum0: Complex64,
    pub sum1: Complex64,
    pub sum2: Complex64,
    /// `Σ_k |c_k g_k|` in the same scaling, the incoherent reference for nodes.
    pub incoherent: f64,
}

impl ScaledEvaluation {
    /// `|Ψ|² / (Σ|c_k g_k|)²`: 1 without interference, 0 at an exact node.
    pub fn coherence(&self) -> f64 {
        if self.incoherent > 0.0 {
            self.sum0.norm_sqr() / (self.incoherent * self.incoherent)
        } else {
            0.0
        }
    }

    /// `Ψ'/Ψ`.
    pub fn log_derivative(&self) -> Complex64 {
        self.sum1 / self.sum0
    }
}

/// Coherent sum of free Gaussian packets with a common normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSuperposition {
    packets: Vec<GaussianPacket>,
    units: PhysicalUnits,
    normalized: bool,
    norm_factor: f64,
}

impl AnalyticSuperposition {
    /// Builds the superposition; when `normalize` is set the common factor is
    /// fixed by quadrature of `|Ψ(x,0)|²`, cross terms included.
    pub fn new(
        packets: Vec<GaussianPacket>,
        units: PhysicalUnits,
        normalize: bool,
    ) -> Result<Self, AnalyticError> {
        if packets.is_empty() {
            return Err(AnalyticError::InvalidParameter(
                "superposition needs at least one packet".into(),
            ));
        }
        let mut sup = Self {
            packets,
            units,
            normalized: false,
            norm_factor: 1.0,
        };
        if normalize {
            let n = sup.norm_at_zero();
            if !(n > 0.0 && n.is_finite()) {
                return Err(AnalyticError::ZeroNorm);
            }
            sup.norm_factor = 1.0 / n.sqrt();
            sup.normalized = true;
            let check = sup.norm_at_zero();
            debug_assert!((check - 1.0).abs() < 1e-8, "normalisation check {check}");
        }
        Ok(sup)
    }

    pub fn packets(&self) -> &[GaussianPacket] {
        &self.packets
    }

    pub fn units(&self) -> &PhysicalUnits {
        &self.units
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    /// Composite Simpson quadrature of `|Ψ(x,0)|²` over a window that covers
    /// every packet to 14 widths.
    fn norm_at_zero(&self) -> f64 {
        let (lo, hi) = self.support(0.0, 14.0);
        let sigma_min = self
            .packets
            .iter()
            .map(|p| p.sigma0)
            .fold(f64::INFINITY, f64::min);
        let mut dp: f64 = 0.0;
        for a in &self.packets {
            for b in &self.packets {
                dp = dp.max((a.momentum0 - b.momentum0).abs());
            }
        }
        let mut h = sigma_min / 64.0;
        if dp > 0.0 {
            h = h.min(0.2 * self.units.hbar / dp);
        }
        let mut n = ((hi - lo) / h).ceil() as usize;
        n = n.clamp(64, 1 << 24);
        if n % 2 == 1 {
            n += 1;
        }
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * self.density(x, 0.0);
        }
        acc * h / 3.0
    }

    /// Interval containing every packet to `widths` standard deviations at `t`.
    pub fn support(&self, t: f64, widths: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.packets {
            let c = p.centroid(t, &self.units);
            let s = p.width(t, &self.units).sigma_t();
            lo = lo.min(c - widths * s);
            hi = hi.max(c + widths * s);
        }
        (lo, hi)
    }

    pub fn evaluate_scaled(&self, x: f64, t: f64) -> ScaledEvaluation {
        let zero = Complex64::new(0.0, 0.0);
        let mut scale = f64::NEG_INFINITY;
        let (mut sum0, mut sum1, mut sum2) = (zero, zero, zero);
        let mut incoherent = 0.0;
        for p in &self.packets {
            let (log_g, d1, d2) = p.log_terms(x, t, &self.units);
            let log_c = log_g + (p.norm_weight * self.norm_factor).ln();
            if log_c.re > scale {
                // Rescale the running sums onto the new largest exponent.
                let r = if scale.is_finite() { (scale - log_c.re).exp() } else { 0.0 };
                sum0 *= r;
                sum1 *= r;
                sum2 *= r;
                incoherent *= r;
                scale = log_c.re;
            }
            let g = (log_c - scale).exp();
            sum0 += g;
            sum1 += g * d1;
            sum2 += g * d2;
            incoherent += g.norm();
        }
        ScaledEvaluation {
            scale,
            sum0,
            sum1,
            sum2,
            incoherent,
        }
    }

    /// Amplitude, gradient and the `∇²√ρ/√ρ` term, all from the closed form.
    pub fn evaluate(&self, x: f64, t: f64) -> WaveSample<1> {
        let e = self.evaluate_scaled(x, t);
        let factor = e.scale.exp();
        let amplitude = e.sum0 * factor;
        let gradient = e.sum1 * factor;
        let mut sample = WaveSample::new(amplitude, [gradient]);
        if e.sum0.norm_sqr() > 0.0 {
            // Ratios from the scaled sums survive underflow of `amplitude`.
            let l1 = e.sum1 / e.sum0;
            let l2 = e.sum2 / e.sum0;
            sample = sample.with_laplacian_term(l2.re + l1.im * l1.im);
        }
        sample
    }

    pub fn amplitude(&self, x: f64, t: f64) -> Complex64 {
        let e = self.evaluate_scaled(x, t);
        e.sum0 * e.scale.exp()
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        self.amplitude(x, t).norm_sqr()
    }

    /// Velocity `(ħ/m) Im(Ψ'/Ψ)` together with the local coherence ratio.
    pub fn velocity_scaled(&self, x: f64, t: f64) -> (f64, f64) {
        let e = self.evaluate_scaled(x, t);
        let v = self.units.hbar_over_mass() * e.log_derivative().im;
        (v, e.coherence())
    }
}

/// Two equal-weight packets at `±x0`, each moving toward the origin with
/// momentum magnitude `p0_magnitude`.
pub fn two_slit_model(
    sigma0: f64,
    x0: f64,
    p0_magnitude: f64,
    units: PhysicalUnits,
) -> Result<AnalyticSuperposition, AnalyticError> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(AnalyticError::InvalidParameter(format!(
            "x0 must be positive, got {x0}"
        )));
    }
    if !(p0_magnitude >= 0.0 && p0_magnitude.is_finite()) {
        return Err(AnalyticError::InvalidParameter(format!(
            "momentum magnitude must be non-negative, got {p0_magnitude}"
        )));
    }
    let left = GaussianPacket::new(-x0, p0_magnitude, sigma0, 1.0)?;
    let right = GaussianPacket::new(x0, -p0_magnitude, sigma0, 1.0)?;
    AnalyticSuperposition::new(vec![left, right], units, true)
}

/// Exact streamline of a single free packet started at `x_init`.
pub fn analytic_trajectory_single_packet(
    packet: &GaussianPacket,
    units: &PhysicalUnits,
    x_init: f64,
    t: f64,
) -> f64 {
    let ratio = packet.width(t, units).sigma_t() / packet.sigma0;
    packet.centroid(t, units) + (x_init - packet.center0) * ratio
}

/// Parameters of the effective barrier model; magnitudes are stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub sigma0: f64,
    pub x0: f64,
    pub p0: f64,
}

impl BarrierParams {
    pub fn new(sigma0: f64, x0: f64, p0: f64) -> Result<Self, AnalyticError> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(AnalyticError::InvalidParameter(format!(
                "sigma0 must be positive, got {sigma0}"
            )));
        }
        if !x0.is_finite() || !p0.is_finite() {
            return Err(AnalyticError::InvalidParameter(
                "x0 and p0 must be finite".into(),
            ));
        }
        Ok(Self {
            sigma0,
            x0: x0.abs(),
            p0: p0.abs(),
        })
    }
}

/// Width `W(t)` and depth `D(t)` of the attractive well at one time, with
/// `D·W == 2ħ²/m` holding exactly in floating point.
pub fn barrier_at(
    params: &BarrierParams,
    units: &PhysicalUnits,
    t: f64,
) -> Result<(f64, f64), AnalyticError> {
    let s0 = params.sigma0;
    let hbar = units.hbar;
    let rate = hbar / (2.0 * units.mass * s0 * s0);
    let denom = 2.0 * params.p0 * s0 * s0 / hbar + rate * t * params.x0;
    if !(denom > 0.0) {
        return Err(AnalyticError::SingularTime { t });
    }
    let sigma_t_sq = s0 * s0 * (1.0 + (rate * t).powi(2));
    let width = PI * sigma_t_sq / denom;
    Ok(exact_pair(width, 2.0 * hbar * hbar / units.mass))
}

/// `(w, d)` with `w` within a few ulps of `width` and `w * d == product` in
/// floating point. Some widths admit no such `d`; the nearest width that does
/// is taken instead, falling back to the correctly rounded quotient.
fn exact_pair(width: f64, product: f64) -> (f64, f64) {
    const MAX_ULPS: u64 = 64;
    let bits = width.to_bits();
    for k in 0..=MAX_ULPS {
        for w in [bits + k, bits.saturating_sub(k)].map(f64::from_bits) {
            let q = (product / w).to_bits();
            for d in [q, q + 1, q.saturating_sub(1), q + 2, q.saturating_sub(2)].map(f64::from_bits) {
                if w * d == product {
                    return (w, d);
                }
            }
        }
    }
    (width, product / width)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveBarrierCurve {
    pub times: Vec<f64>,
    pub widths: Vec<f64>,
    pub depths: Vec<f64>,
    pub params: BarrierParams,
    pub units: PhysicalUnits,
}

pub fn effective_barrier(
    params: BarrierParams,
    units: PhysicalUnits,
    times: &[f64],
) -> Result<EffectiveBarrierCurve, AnalyticError> {
    let mut widths = Vec::with_capacity(times.len());
    let mut depths = Vec::with_capacity(times.len());
    for &t in times {
        let (w, d) = barrier_at(&params, &units, t)?;
        widths.push(w);
        depths.push(d);
    }
    Ok(EffectiveBarrierCurve {
        times: times.to_vec(),
        widths,
        depths,
        params,
        units,
    })
}
