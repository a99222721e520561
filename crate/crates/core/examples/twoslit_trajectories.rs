//! Bohmian ensemble for the two-packet state: no trajectory crosses x = 0
//! and the endpoint histogram follows |Ψ(x, t)|².

use bohmflow::analytic::two_slit_model;
use bohmflow::trajectories::{
    binned_density, check_non_crossing, ensemble_histogram, integrate_ensemble, ordering_preserved,
    sample_initial_conditions_1d, total_variation, uniform_edges, Boundary, IntegratorConfig,
};
use bohmflow::PhysicalUnits;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let psi = two_slit_model(0.5, 5.0, 0.0, PhysicalUnits::default())?;
    let seed = 3;
    let starts = sample_initial_conditions_1d(|x| psi.density(x, 0.0), 1000, seed, (-10.0, 10.0))?;
    let starts: Vec<[f64; 1]> = starts.into_iter().map(|x| [x]).collect();
    let ens = integrate_ensemble(&psi, &starts, 0.0, 3.0, &IntegratorConfig::with_dt(1e-3), seed)?;

    let crossing = check_non_crossing(&ens, &Boundary::point(0.0));
    println!("crossings of x = 0: {}", crossing.violations);
    println!("closest approach:   {:.3e}", crossing.min_distance);
    println!("ordering preserved: {}", ordering_preserved(&ens));

    let edges = uniform_edges(-10.0, 10.0, 100);
    let hist = ensemble_histogram(&ens, 3.0, &edges)?;
    let exact = binned_density(|x| psi.density(x, 3.0), &edges, 64)?;
    println!("TV distance at t = 3: {:.4}", total_variation(&hist, &exact));
    Ok(())
}
