use std::f64::consts::PI;

use bohmflow::analytic::{
    analytic_trajectory_single_packet, barrier_at, effective_barrier, two_slit_model, BarrierParams,
};
use bohmflow::fields::{
    hydro_fields, quantum_potential_from_wave, unwrap_phase, velocity_from_wave, FieldError,
};
use bohmflow::{AnalyticSuperposition, GaussianPacket, NodeThreshold, PhysicalUnits};
use num_complex::Complex64;
use proptest::prelude::*;

fn unit() -> PhysicalUnits {
    PhysicalUnits::default()
}

fn single(x0: f64, p0: f64, sigma0: f64, units: PhysicalUnits) -> AnalyticSuperposition {
    AnalyticSuperposition::new(vec![GaussianPacket::new(x0, p0, sigma0, 1.0).unwrap()], units, true).unwrap()
}

/// Independent free-Gaussian oracle for the Bohmian velocity.
fn free_velocity(x: f64, xc: f64, sigma0: f64, t: f64) -> f64 {
    let r = 1.0 / (2.0 * sigma0 * sigma0);
    (x - xc) * r * r * t / (1.0 + (r * t).powi(2))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn velocity_matches_closed_form_oracle() {
    let psi = single(0.0, 0.0, 0.5, unit());
    let node = NodeThreshold::default();
    let v = velocity_from_wave(&psi.evaluate(1.0, 1.0), &unit(), &node).unwrap()[0];
    assert!((v - 0.8).abs() < 1e-12, "v = {v}");
    for &t in &[0.0, 0.3, 1.0, 2.5] {
        let v = velocity_from_wave(&psi.evaluate(0.0, t), &unit(), &node).unwrap()[0];
        assert!(v.abs() < 1e-14);
        for &x in &[-2.0, -0.4, 0.7, 3.0] {
            let v = velocity_from_wave(&psi.evaluate(x, t), &unit(), &node).unwrap()[0];
            assert!((v - free_velocity(x, 0.0, 0.5, t)).abs() < 1e-12);
        }
    }
}

#[test]
fn quantum_potential_spot_values() {
    let psi = single(2.0, 0.0, 0.5, unit());
    let node = NodeThreshold::default();
    let q0 = quantum_potential_from_wave(&psi.evaluate(2.0, 0.0), &unit(), &node).unwrap();
    assert!((q0 - 1.0).abs() < 1e-12);
    let q1 = quantum_potential_from_wave(&psi.evaluate(2.0 + 2f64.sqrt() * 0.5, 0.0), &unit(), &node).unwrap();
    assert!(q1.abs() < 1e-12);
}

#[test]
fn hydro_fields_of_trivial_samples() {
    let u = unit();
    let node = NodeThreshold::default();
    let s = bohmflow::WaveSample::new(Complex64::new(1.0, 0.0), [Complex64::new(0.0, 0.0)]);
    let f = hydro_fields(&s, &u, &node, false);
    assert_eq!((f.rho, f.phase), (1.0, 0.0));
    assert_eq!(f.velocity, Ok([0.0]));
    let s = bohmflow::WaveSample::new(Complex64::new(0.0, 1.0), [Complex64::new(0.0, 0.0)]);
    let f = hydro_fields(&s, &u, &node, true);
    assert_eq!(f.rho, 1.0);
    assert!((f.phase - PI / 2.0).abs() < 1e-15);
    assert_eq!(f.quantum_potential, Some(Err(FieldError::MissingDerivative)));
}

#[test]
fn two_slit_density_at_origin() {
    let psi = two_slit_model(0.5, 5.0, 0.0, unit()).unwrap();
    // The overlap of packets 10 apart with σ₀ = 0.5 is e^{-50}: the norm
    // factor is 1/√2 and both terms add in phase at x = 0.
    let g = (2.0 * PI * 0.25f64).powf(-0.25) * (-25.0f64).exp();
    let expected = 4.0 * (g / 2f64.sqrt()).powi(2);
    let rho = psi.density(0.0, 0.0);
    assert!((rho - expected).abs() <= 1e-12 * expected, "{rho} vs {expected}");
}

#[test]
fn width_at_unit_time() {
    let p = GaussianPacket::new(0.0, 0.0, 0.5, 1.0).unwrap();
    assert!((p.width(1.0, &unit()).sigma_t() - 1.118034).abs() < 1e-6);
    assert_eq!(p.width(0.0, &unit()).value, Complex64::new(0.5, 0.0));
}

#[test]
fn two_slit_states_are_normalized() {
    for &(s, x0, p0) in &[(0.5, 5.0, 0.0), (0.5, 5.0, 10.0), (0.5, 5.0, 100.0), (1.5, 1.0, 2.0), (0.8, 0.5, 0.0)] {
        let psi = two_slit_model(s, x0, p0, unit()).unwrap();
        let mass = simpson(|x| psi.density(x, 0.0), -40.0, 40.0, 200_000);
        assert!((mass - 1.0).abs() < 1e-8, "({s}, {x0}, {p0}): {mass}");
    }
}

#[test]
fn barrier_spot_values_and_identity() {
    let u = unit();
    let (w, d) = barrier_at(&BarrierParams::new(0.5, 5.0, 1.0).unwrap(), &u, 0.0).unwrap();
    assert!((w - PI / 2.0).abs() < 1e-12 && (d - 4.0 / PI).abs() < 1e-12);
    let (w, d) = barrier_at(&BarrierParams::new(0.5, 5.0, 0.0).unwrap(), &u, 1.0).unwrap();
    assert!((w - PI / 8.0).abs() < 1e-12 && (d - 5.092958).abs() < 1e-6);
    // Larger |p₀| gives the narrower well at t = 0.
    let w0: Vec<f64> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&p| barrier_at(&BarrierParams::new(0.5, 5.0, p).unwrap(), &u, 0.0).unwrap().0)
        .collect();
    assert!(w0[0] > w0[1] && w0[1] > w0[2]);
    assert!((w0[1] * 10.0 - w0[2] * 100.0).abs() < 1e-12);
}

#[test]
fn barrier_identity_is_exact_on_plot_grids() {
    let u = unit();
    let times: Vec<f64> = (1..=300).map(|k| k as f64 * 0.01).collect();
    for p0 in [0.0, 1.0, 10.0, 100.0] {
        let c = effective_barrier(BarrierParams::new(0.5, 5.0, p0).unwrap(), u, &times).unwrap();
        for (w, d) in c.widths.iter().zip(&c.depths) {
            assert_eq!(w * d, 2.0, "p0 = {p0}, W = {w:?}");
        }
    }
}

#[test]
fn continuity_residual_on_test_lattice() {
    let psi = two_slit_model(0.5, 5.0, 0.0, unit()).unwrap();
    let node = NodeThreshold::default();
    let h = 1e-4;
    let current = |x: f64, t: f64| {
        let f = hydro_fields(&psi.evaluate(x, t), &unit(), &node, false);
        f.current.map(|j| j[0]).unwrap_or(0.0)
    };
    let mut worst: f64 = 0.0;
    for it in 0..=60 {
        let t = 3.0 * it as f64 / 60.0;
        for ix in 0..=400 {
            let x = -10.0 + 20.0 * ix as f64 / 400.0;
            if psi.density(x, t) <= 1e-8 {
                continue;
            }
            let drho = (psi.density(x, t + h) - psi.density(x, t - h)) / (2.0 * h);
            let dj = (current(x + h, t) - current(x - h, t)) / (2.0 * h);
            worst = worst.max((drho + dj).abs());
        }
    }
    assert!(worst < 1e-4, "max residual {worst:e}");
}

#[test]
fn closed_form_solves_the_free_equation() {
    let psi = two_slit_model(0.5, 5.0, 3.0, unit()).unwrap();
    let h = 1e-3;
    let d1 = |f: &dyn Fn(f64) -> Complex64, z: f64| {
        (-f(z - 3.0 * h) + 9.0 * f(z - 2.0 * h) - 45.0 * f(z - h) + 45.0 * f(z + h) - 9.0 * f(z + 2.0 * h) + f(z + 3.0 * h))
            / (60.0 * h)
    };
    let d2 = |f: &dyn Fn(f64) -> Complex64, z: f64| {
        (2.0 * f(z - 3.0 * h) - 27.0 * f(z - 2.0 * h) + 270.0 * f(z - h) - 490.0 * f(z) + 270.0 * f(z + h)
            - 27.0 * f(z + 2.0 * h)
            + 2.0 * f(z + 3.0 * h))
            / (180.0 * h * h)
    };
    let i = Complex64::i();
    for &t in &[0.1, 0.7, 1.5, 3.0] {
        let peak = (0..=800).map(|k| psi.amplitude(-20.0 + 0.05 * k as f64, t).norm()).fold(0.0, f64::max);
        for k in 0..=400 {
            let x = -20.0 + 0.1 * k as f64;
            let a = psi.amplitude(x, t);
            if a.norm() < 1e-6 * peak {
                continue;
            }
            let dt = d1(&|s| psi.amplitude(x, s), t);
            let dxx = d2(&|y| psi.amplitude(y, t), x);
            let r = (i * dt + 0.5 * dxx).norm() / a.norm();
            assert!(r < 1e-6, "t = {t}, x = {x}: {r:e}");
        }
    }
}

#[test]
fn streamline_oracle_solves_the_guidance_equation() {
    let u = PhysicalUnits::new(1.3, 0.7).unwrap();
    let p = GaussianPacket::new(-1.0, 0.8, 0.6, 1.0).unwrap();
    let psi = AnalyticSuperposition::new(vec![p], u, true).unwrap();
    let node = NodeThreshold::default();
    let h = 1e-4;
    for &x_init in &[-2.0, -1.0, -0.3, 0.9] {
        for &t in &[0.2, 1.0, 2.0] {
            let xdot = (analytic_trajectory_single_packet(&p, &u, x_init, t + h)
                - analytic_trajectory_single_packet(&p, &u, x_init, t - h))
                / (2.0 * h);
            let x = analytic_trajectory_single_packet(&p, &u, x_init, t);
            let v = velocity_from_wave(&psi.evaluate(x, t), &u, &node).unwrap()[0];
            assert!((xdot - v).abs() <= 1e-6 * v.abs().max(1.0), "{xdot} vs {v}");
        }
    }
    let x = analytic_trajectory_single_packet(&GaussianPacket::new(0.0, 0.0, 0.5, 1.0).unwrap(), &unit(), 0.5, 1.0);
    assert!((x - 1.118034).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_superposition_is_mirror_symmetric(
        x in -12.0..12.0f64, t in 0.0..3.0f64, sigma0 in 0.3..1.5f64, x0 in 0.5..6.0f64, p0 in 0.0..10.0f64,
    ) {
        let psi = two_slit_model(sigma0, x0, p0, unit()).unwrap();
        let (a, b) = (psi.density(x, t), psi.density(-x, t));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1e-300));
        let (va, ca) = psi.velocity_scaled(x, t);
        let (vb, _) = psi.velocity_scaled(-x, t);
        if ca > 1e-8 {
            prop_assert!((va + vb).abs() <= 1e-9 * va.abs().max(1.0), "{va} vs {vb}");
        }
    }

    #[test]
    fn quantum_potential_sign_follows_the_width(
        t in 0.0..4.0f64, r in 0.02..3.0f64, sigma0 in 0.3..1.2f64, p0 in -3.0..3.0f64,
    ) {
        let psi = single(1.0, p0, sigma0, unit());
        let p = psi.packets()[0];
        let st = p.width(t, &unit()).sigma_t();
        let d = r * 2f64.sqrt() * st;
        prop_assume!((r - 1.0).abs() > 1e-6);
        let x = p.centroid(t, &unit()) + d;
        let q = quantum_potential_from_wave(&psi.evaluate(x, t), &unit(), &NodeThreshold::relative_to(0.0)).unwrap();
        prop_assert_eq!(q > 0.0, r < 1.0, "q = {}", q);
    }

    #[test]
    fn velocity_equals_phase_gradient(
        x in -4.0..4.0f64, t in 0.0..3.0f64, p0 in -6.0..6.0f64, sigma0 in 0.4..1.5f64,
        hbar in 0.5..2.0f64, mass in 0.5..2.0f64,
    ) {
        let u = PhysicalUnits::new(hbar, mass).unwrap();
        let psi = two_slit_model(sigma0, 1.5, p0.abs(), u).unwrap();
        let (v, coherence) = psi.velocity_scaled(x, t);
        prop_assume!(coherence > 1e-3);
        let h = 1e-5;
        let phases: Vec<f64> = [x - h, x, x + h].iter().map(|&y| hbar * psi.amplitude(y, t).arg()).collect();
        let s = unwrap_phase(&phases, &u);
        let fd = (s[2] - s[0]) / (2.0 * h) / mass;
        prop_assert!((fd - v).abs() <= 1e-6 * v.abs().max(1.0), "{} vs {}", fd, v);
    }

    #[test]
    fn current_is_density_times_velocity(x in -8.0..8.0f64, t in 0.0..3.0f64) {
        let psi = two_slit_model(0.5, 5.0, 2.0, unit()).unwrap();
        let f = hydro_fields(&psi.evaluate(x, t), &unit(), &NodeThreshold::relative_to(1e-300), true);
        if let (Ok(v), Ok(j)) = (f.velocity, f.current) {
            prop_assert_eq!(j[0], f.rho * v[0]);
        }
    }

    #[test]
    fn barrier_identity_is_exact(
        sigma0 in 0.1..3.0f64, x0 in 0.1..20.0f64, p0 in 0.0..200.0f64, t in 0.0..10.0f64,
    ) {
        prop_assume!(p0 > 0.0 || t > 0.0);
        let (w, d) = barrier_at(&BarrierParams::new(sigma0, x0, p0).unwrap(), &unit(), t).unwrap();
        prop_assert!(w > 0.0);
        prop_assert_eq!(w * d, 2.0);
    }
}
