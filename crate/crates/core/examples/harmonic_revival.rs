//! A displaced ground state in V = r²/2 returns to its start after one
//! period.

use std::f64::consts::PI;

use bohmflow::cli::harmonic_potential;
use bohmflow::gridprop::{density_l2_distance, GridSpec, GridWaveField, Propagator};
use bohmflow::{GaussianPacket, PhysicalUnits};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let units = PhysicalUnits::default();
    let spec = GridSpec::square(128, -10.0, 10.0)?;
    let s = 0.5f64.sqrt();
    let (px, py) = (GaussianPacket::new(2.0, 0.0, s, 1.0)?, GaussianPacket::new(0.0, 1.0, s, 1.0)?);
    let mut f = GridWaveField::product_gaussian(spec, units, &px, &py, 0.0)?;
    let initial = f.density();

    let steps = 4096;
    let dt = 2.0 * PI / steps as f64;
    let half = Propagator::half_phase(&harmonic_potential(&spec, &units, 1.0), &units, dt);
    let mut p = Propagator::new(spec, units);
    for k in 1..=steps {
        p.step(&mut f, &half, dt)?;
        if k % 1024 == 0 {
            let d = density_l2_distance(&spec, &f.density(), &initial)?;
            println!("t = {:.4}  density L2 distance to start {d:.2e}", f.time);
        }
    }
    Ok(())
}
