//! Split-operator propagation of a free 2D Gaussian against the closed form.

use bohmflow::gridprop::{propagate, GridSpec, GridWaveField, PotentialSchedule};
use bohmflow::{GaussianPacket, PhysicalUnits};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let units = PhysicalUnits::default();
    let spec = GridSpec::square(256, -16.0, 16.0)?;
    let px = GaussianPacket::new(-3.0, 2.0, 1.0, 1.0)?;
    let py = GaussianPacket::new(1.0, -1.0, 0.8, 1.0)?;
    let start = GridWaveField::product_gaussian(spec, units, &px, &py, 0.0)?;
    let n0 = start.norm();
    let (end, snaps) = propagate(start, &PotentialSchedule::single(vec![]), 1.0, 1e-3, &[0.25, 0.5, 0.75])?;
    for s in &snaps {
        let exact = GridWaveField::product_gaussian(spec, units, &px, &py, s.field.time)?;
        println!("t = {:.2}  L2 error {:.2e}", s.field.time, s.field.l2_distance(&exact.amplitudes)?);
    }
    let exact = GridWaveField::product_gaussian(spec, units, &px, &py, 1.0)?;
    println!("t = 1.00  L2 error {:.2e}", end.l2_distance(&exact.amplitudes)?);
    println!("norm drift {:.2e}", (end.norm() - n0).abs() / n0);
    Ok(())
}
