//! Open and closed configurations of the small delayed-choice scenario.

use bohmflow::wheeler::{
    recombination_crossings, routing_analysis, run_scenario, Arm, ChoiceSchedule, Detector, InterferometerLayout,
    ScenarioConfig, WheelerError,
};

fn main() -> Result<(), WheelerError> {
    let sc = ScenarioConfig::quick();
    let layout = InterferometerLayout::from_config(&sc, sc.geometry.splitter_height)?;
    let (lo, hi) = layout.choice_window();
    println!("valid switching window: ({lo:.3}, {hi:.3})");
    for choice in [ChoiceSchedule::Open, ChoiceSchedule::Closed, ChoiceSchedule::DelayedRemove(0.5 * (lo + hi))] {
        let out = run_scenario(&layout, choice, sc.ensemble.trajectories, sc.ensemble.seed, &sc.numerics, sc.ensemble.sampling)?;
        let r = &out.report;
        let m = routing_analysis(r);
        println!(
            "{:<15} D1 {:.3}  D2 {:.3}  lost {}  P1->D2 {:.3}  P2->D1 {:.3}  drift {:.1e}",
            choice.name(),
            r.fraction_d1(),
            r.fraction_d2(),
            r.n_lost,
            m.fraction(Arm::P1, Detector::D2),
            m.fraction(Arm::P2, Detector::D1),
            r.norm_drift
        );
        if choice == ChoiceSchedule::Open {
            let c = recombination_crossings(&out.ensemble, &layout, hi);
            println!("{:<15} diagonal crossings {} by {} trajectories", "", c.violations, c.trajectories_crossing);
        }
    }
    Ok(())
}
