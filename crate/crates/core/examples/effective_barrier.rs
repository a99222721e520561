//! Width and depth of the effective interference well for several
//! counter-propagating momenta.

use bohmflow::analytic::{effective_barrier, AnalyticError, BarrierParams};
use bohmflow::PhysicalUnits;

fn main() -> Result<(), AnalyticError> {
    let units = PhysicalUnits::default();
    let times: Vec<f64> = (1..=10).map(|k| 0.3 * k as f64).collect();
    for p0 in [0.0, 1.0, 10.0, 100.0] {
        let curve = effective_barrier(BarrierParams::new(0.5, 5.0, p0)?, units, &times)?;
        println!("p0 = {p0}");
        for ((t, w), d) in curve.times.iter().zip(&curve.widths).zip(&curve.depths) {
            println!("  t {t:>4.1}  W {w:>10.6}  D {d:>12.6}  D*W {}", d * w);
        }
    }
    Ok(())
}
