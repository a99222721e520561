//! Hydrodynamic fields of a wave function.
//!
//! Every wave-function source (closed-form or grid-sampled) reduces to a
//! [`WaveSample`]: the complex amplitude, its spatial gradient and, when the
//! quantum potential is wanted, the `∇²√ρ/√ρ` term. From a sample the
//! density, phase, velocity, current and quantum potential follow pointwise.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

/// Physical constants. Defaults to atomic-like units with `ħ = m = 1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhysicalUnits {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalUnits {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicalUnits {
    pub fn new(hbar: f64, mass: f64) -> Result<Self, FieldError> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(FieldError::InvalidUnits("hbar must be positive"));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(FieldError::InvalidUnits("mass must be positive"));
        }
        Ok(Self { hbar, mass })
    }

    /// `ħ/m`, the factor between phase gradient and velocity.
    #[inline]
    pub fn hbar_over_mass(&self) -> f64 {
        self.hbar / self.mass
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum FieldError {
    #[error("density {density:e} below node threshold {threshold:e}")]
    Node { density: f64, threshold: f64 },
    #[error("sample carries no Laplacian term; quantum potential unavailable")]
    MissingDerivative,
    #[error("invalid physical units: {0}")]
    InvalidUnits(&'static str),
}

/// Density floor below which the velocity field is treated as undefined.
///
/// The floor is `relative × reference`, where `reference` is normally the
/// instantaneous peak density of the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeThreshold {
    pub relative: f64,
    pub reference: f64,
}

impl Default for NodeThreshold {
    fn default() -> Self {
        Self {
            relative: 1e-12,
            reference: 1.0,
        }
    }
}

impl NodeThreshold {
    pub fn relative_to(reference: f64) -> Self {
        Self {
            reference,
            ..Self::default()
        }
    }

    #[inline]
    pub fn absolute(&self) -> f64 {
        self.relative * self.reference
    }

    fn check(&self, rho: f64) -> Result<(), FieldError> {
        let threshold = self.absolute();
        // `!(rho >= threshold)` also rejects NaN.
        if !(rho >= threshold) || rho == 0.0 {
            Err(FieldError::Node {
                density: rho,
                threshold,
            })
        } else {
            Ok(())
        }
    }
}

/// Pointwise wave-function data in `D` spatial dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSample<const D: usize> {
    pub amplitude: Complex64,
    pub gradient: [Complex64; D],
    /// `∇²ρ^{1/2} / ρ^{1/2}`, present only when the quantum potential is requested.
    pub laplacian_of_sqrt_rho_over_sqrt_rho: Option<f64>,
}

impl<const D: usize> WaveSample<D> {
    pub fn new(amplitude: Complex64, gradient: [Complex64; D]) -> Self {
        Self {
            amplitude,
            gradient,
            laplacian_of_sqrt_rho_over_sqrt_rho: None,
        }
    }

    pub fn with_laplacian_term(mut self, term: f64) -> Self {
        self.laplacian_of_sqrt_rho_over_sqrt_rho = Some(term);
        self
    }

    /// Builds the sample from `Ψ`, `∇Ψ` and `∇²Ψ`, deriving the `√ρ` term as
    /// `Re(∇²Ψ/Ψ) + |Im(∇Ψ/Ψ)|²`.
    pub fn from_derivatives(
        amplitude: Complex64,
        gradient: [Complex64; D],
        laplacian: Complex64,
    ) -> Self {
        let mut sample = Self::new(amplitude, gradient);
        if amplitude.norm_sqr() > 0.0 {
            let mut phase_grad_sq = 0.0;
            for g in gradient.iter() {
                phase_grad_sq += (g / amplitude).im.powi(2);
            }
            sample.laplacian_of_sqrt_rho_over_sqrt_rho =
                Some((laplacian / amplitude).re + phase_grad_sq);
        }
        sample
    }

    #[inline]
    pub fn density(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

/// Density, phase, velocity, current and (optionally) quantum potential at
/// one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroFields<const D: usize> {
    pub rho: f64,
    /// Principal value of `S`, in `(−πħ, πħ]`.
    pub phase: f64,
    /// Set when the point is an exact node; `phase` is then reported as 0.
    pub at_node: bool,
    pub velocity: Result<[f64; D], FieldError>,
    pub current: Result<[f64; D], FieldError>,
    pub quantum_potential: Option<Result<f64, FieldError>>,
}

/// `v = (ħ/m) Im(∇Ψ/Ψ)`.
pub fn velocity_from_wave<const D: usize>(
    sample: &WaveSample<D>,
    units: &PhysicalUnits,
    node: &NodeThreshold,
) -> Result<[f64; D], FieldError> {
    node.check(sample.density())?;
    let hm = units.hbar_over_mass();
    let mut v = [0.0; D];
    for (vi, g) in v.iter_mut().zip(sample.gradient.iter()) {
        *vi = hm * (g / sample.amplitude).im;
    }
    Ok(v)
}

/// `Q = −(ħ²/2m) ∇²ρ^{1/2}/ρ^{1/2}`.
pub fn quantum_potential_from_wave<const D: usize>(
    sample: &WaveSample<D>,
    units: &PhysicalUnits,
    node: &NodeThreshold,
) -> Result<f64, FieldError> {
    node.check(sample.density())?;
    let term = sample
        .laplacian_of_sqrt_rho_over_sqrt_rho
        .ok_or(FieldError::MissingDerivative)?;
    Ok(-units.hbar * units.hbar / (2.0 * units.mass) * term)
}

/// Principal-value phase `S = ħ arg Ψ`, with exact nodes mapped to 0.
pub fn principal_phase(amplitude: Complex64, units: &PhysicalUnits) -> (f64, bool) {
    if amplitude.norm_sqr() == 0.0 {
        return (0.0, true);
    }
    let mut arg = amplitude.arg();
    // `atan2` returns −π for (−x, −0.0); fold it onto the closed upper end.
    if arg <= -PI {
        arg = PI;
    }
    (units.hbar * arg, false)
}

pub fn hydro_fields<const D: usize>(
    sample: &WaveSample<D>,
    units: &PhysicalUnits,
    node: &NodeThreshold,
    want_q: bool,
) -> HydroFields<D> {
    let rho = sample.density();
    let (phase, at_node) = principal_phase(sample.amplitude, units);
    let velocity = velocity_from_wave(sample, units, node);
    let current = velocity.map(|v| v.map(|vi| rho * vi));
    let quantum_potential = want_q.then(|| quantum_potential_from_wave(sample, units, node));
    HydroFields {
        rho,
        phase,
        at_node,
        velocity,
        current,
        quantum_potential,
    }
}

/// Removes `2πħ` jumps from a phase profile sampled along a sorted axis.
///
/// Presentation only: the guidance equation never needs the unwrapped phase.
pub fn unwrap_phase(phases: &[f64], units: &PhysicalUnits) -> Vec<f64> {
    let period = 2.0 * PI * units.hbar;
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &s in phases {
        if let Some(p) = prev {
            let jump = s - p;
            offset -= period * (jump / period).round();
        }
        out.push(s + offset);
        prev = Some(s);
    }
    out
}
