//! Density, phase, velocity and quantum potential of the two-packet state
//! along x at a few times.

use bohmflow::analytic::two_slit_model;
use bohmflow::fields::hydro_fields;
use bohmflow::{NodeThreshold, PhysicalUnits};

fn main() {
    let psi = two_slit_model(0.5, 5.0, 0.0, PhysicalUnits::default()).expect("valid parameters");
    let node = NodeThreshold::default();
    println!("{:>5} {:>6} {:>12} {:>10} {:>12}", "t", "x", "rho", "v", "Q");
    for t in [0.0, 1.0, 3.0] {
        for x in [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0] {
            let h = hydro_fields(&psi.evaluate(x, t), psi.units(), &node, true);
            let v = h.velocity.map(|v| v[0]).unwrap_or(f64::NAN);
            let q = h.quantum_potential.and_then(Result::ok).unwrap_or(f64::NAN);
            println!("{t:>5.1} {x:>6.1} {:>12.4e} {v:>10.4} {q:>12.4}", h.rho);
        }
    }
}
