//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary so the timed criteria are not
//! competing with other tests for cores.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use bohmflow::analytic::{analytic_trajectory_single_packet, two_slit_model};
use bohmflow::fields::hydro_fields;
use bohmflow::cli::{run_command, CommandName, Overrides};
use bohmflow::gridprop::{grid_velocity_field, propagate, GridSpec, GridWaveField, PotentialSchedule};
use bohmflow::trajectories::{
    binned_density, check_non_crossing, ensemble_histogram, integrate_ensemble, integrate_trajectory,
    ordering_preserved, sample_initial_conditions_1d, total_variation, uniform_edges, Boundary, IntegratorConfig,
    InverseTransformSampler, TrajectoryEnsemble,
};
use bohmflow::wheeler::{
    calibrate_beam_splitter, routing_analysis, run_scenario, Arm, ChoiceSchedule, DetectorReport, Detector,
    InterferometerLayout, ScenarioConfig,
};
use bohmflow::{AnalyticSuperposition, GaussianPacket, NodeThreshold, PhysicalUnits};

type Verdict = (bool, String);

fn unit() -> PhysicalUnits {
    PhysicalUnits::default()
}

fn packet(x0: f64, p0: f64, sigma: f64) -> GaussianPacket {
    GaussianPacket::new(x0, p0, sigma, 1.0).unwrap()
}

fn symmetric_pair() -> AnalyticSuperposition {
    two_slit_model(0.5, 5.0, 0.0, unit()).unwrap()
}

fn pair_ensemble(initials: Vec<f64>, seed: u64) -> TrajectoryEnsemble<1> {
    let initials: Vec<[f64; 1]> = initials.into_iter().map(|x| [x]).collect();
    integrate_ensemble(&symmetric_pair(), &initials, 0.0, 3.0, &IntegratorConfig::with_dt(1e-3), seed).unwrap()
}

/// Norm drifts of every grid run in the suite, checked by criterion 10.
#[derive(Default)]
struct Drifts(Vec<(String, f64)>);

fn free_packet(drifts: &mut Drifts) -> Verdict {
    let spec = GridSpec::square(512, -16.0, 16.0).unwrap();
    let (px, py) = (packet(-3.0, 2.0, 1.0), packet(1.0, -1.0, 0.8));
    let f = GridWaveField::product_gaussian(spec, unit(), &px, &py, 0.0).unwrap();
    let n0 = f.norm();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let (end, _) = pool.install(|| propagate(f, &PotentialSchedule::single(vec![]), 1.0, 1e-3, &[]).unwrap());
    let secs = start.elapsed().as_secs_f64();
    let exact = GridWaveField::product_gaussian(spec, unit(), &px, &py, 1.0).unwrap();
    let err = end.l2_distance(&exact.amplitudes).unwrap();
    drifts.0.push(("free 512²".into(), ((end.norm() - n0) / n0).abs()));
    (err < 1e-6 && secs < 60.0, format!("L2 error {err:.2e}, {secs:.1} s on one thread"))
}

fn rk4_oracle() -> Verdict {
    let p = packet(2.0, 0.0, 0.5);
    let psi = AnalyticSuperposition::new(vec![p], unit(), true).unwrap();
    let err = |dt: f64| {
        let tr = integrate_trajectory(&psi, [2.5], 0.0, 1.0, &IntegratorConfig::with_dt(dt)).unwrap();
        (tr.positions.last().unwrap()[0] - analytic_trajectory_single_packet(&p, &unit(), 2.5, 1.0)).abs()
    };
    let e: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| err(dt)).collect();
    let ratios: Vec<f64> = e.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = e[2] < 1e-6 && ratios.iter().all(|r| (16.0 / 3.0..=48.0).contains(r));
    (ok, format!("endpoint error {:.2e} at dt = 1e-3, halving ratios {:.1} {:.1}", e[2], ratios[0], ratios[1]))
}

fn non_crossing(ens: &TrajectoryEnsemble<1>) -> Verdict {
    let report = check_non_crossing(ens, &Boundary::point(0.0));
    let complete = ens.flags.iter().filter(|f| f.is_complete()).count();
    let ordered = ordering_preserved(ens);
    (
        report.violations == 0 && ordered && complete == ens.len(),
        format!(
            "{} crossings, ordering preserved: {ordered}, {complete}/{} complete, closest approach {:.2e}",
            report.violations,
            ens.len(),
            report.min_distance
        ),
    )
}

fn histograms(ens: &TrajectoryEnsemble<1>) -> Verdict {
    let psi = symmetric_pair();
    let edges = uniform_edges(-10.0, 10.0, 100);
    let exact = binned_density(|x| psi.density(x, 3.0), &edges, 64).unwrap();
    let tv = total_variation(&ensemble_histogram(ens, 3.0, &edges).unwrap(), &exact);

    // Scaling uses i.i.d. starts (one stratum), averaged over seeds.
    let sampler = InverseTransformSampler::new(|x| psi.density(x, 0.0), (-10.0, 10.0)).unwrap();
    let seeds = 4;
    let sizes = [500usize, 2000, 8000];
    let d: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            (0..seeds)
                .map(|s| {
                    let e = pair_ensemble(sampler.sample(n, 1000 + s, 1), s);
                    total_variation(&ensemble_histogram(&e, 3.0, &edges).unwrap(), &exact)
                })
                .sum::<f64>()
                / seeds as f64
        })
        .collect();
    // Least-squares slope of log TV against log n.
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = d.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let ok = tv < 0.07 && (-0.75..=-0.25).contains(&slope);
    (
        ok,
        format!(
            "TV {tv:.4} at n = 2000; i.i.d. TV {:.4} / {:.4} / {:.4} at n = 500 / 2000 / 8000, slope {slope:.2}",
            d[0], d[1], d[2]
        ),
    )
}

fn continuity(drifts: &mut Drifts) -> Verdict {
    let psi = symmetric_pair();
    let node = NodeThreshold::default();
    let h = 1e-4;
    let current = |x: f64, t: f64| hydro_fields(&psi.evaluate(x, t), &unit(), &node, false).current.map(|j| j[0]).unwrap_or(0.0);
    let mut analytic: f64 = 0.0;
    for it in 0..=60 {
        let t = 3.0 * it as f64 / 60.0;
        for ix in 0..=400 {
            let x = -10.0 + 20.0 * ix as f64 / 400.0;
            if psi.density(x, t) > 1e-8 {
                let drho = (psi.density(x, t + h) - psi.density(x, t - h)) / (2.0 * h);
                let dj = (current(x + h, t) - current(x - h, t)) / (2.0 * h);
                analytic = analytic.max((drho + dj).abs());
            }
        }
    }

    let spec = GridSpec::square(256, -16.0, 16.0).unwrap();
    let f0 = GridWaveField::product_gaussian(spec, unit(), &packet(-2.0, 2.0, 1.0), &packet(0.5, -1.0, 1.0), 0.0).unwrap();
    let n0 = f0.norm();
    let dt = 1e-3;
    let (_, snaps) = propagate(f0, &PotentialSchedule::single(vec![]), 0.5 + dt, dt, &[0.5 - dt, 0.5, 0.5 + dt]).unwrap();
    let (before, mid, after) = (&snaps[0].field, &snaps[1].field, &snaps[2].field);
    drifts.0.push(("continuity 256²".into(), ((after.norm() - n0) / n0).abs()));
    let vel = grid_velocity_field(mid, 1e-12);
    let rho = mid.density();
    let jx: Vec<f64> = rho.iter().zip(&vel.vx).map(|(r, v)| r * v).collect();
    let jy: Vec<f64> = rho.iter().zip(&vel.vy).map(|(r, v)| r * v).collect();
    let (n, dx) = (spec.nx, spec.dx());
    let d4 = |a: &[f64], i: usize, stride: usize, pos: usize| {
        let at = |k: isize| a[i - pos * stride + ((pos as isize + k).rem_euclid(n as isize) as usize) * stride];
        (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * dx)
    };
    let (rb, ra) = (before.density(), after.density());
    let mut grid = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let i = spec.index(ix, iy);
            grid += ((ra[i] - rb[i]) / (2.0 * dt) + d4(&jx, i, 1, ix) + d4(&jy, i, n, iy)).abs() * spec.cell_area();
        }
    }
    (
        analytic < 1e-4 && grid < 1e-4,
        format!("analytic max residual {analytic:.2e}, grid integrated residual {grid:.2e} per unit time"),
    )
}

fn barrier_curves(dir: &Path) -> Verdict {
    run_command(CommandName::Barrier, &Overrides::default(), dir, None).unwrap();
    let text = std::fs::read_to_string(dir.join("barrier.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let num = |s: &str| s.parse::<f64>().unwrap();
    let mut momenta: Vec<f64> = rows.iter().map(|r| num(r[0])).collect();
    momenta.dedup();
    let regular: Vec<&Vec<&str>> = rows.iter().filter(|r| r[4] == "false").collect();
    let inexact = regular.iter().filter(|r| num(r[2]) * num(r[3]) != 2.0).count();
    let width = |p0: f64, t: f64| num(rows.iter().find(|r| num(r[0]) == p0 && (num(r[1]) - t).abs() < 1e-9).unwrap()[2]);
    let (a, b) = ((width(1.0, 0.0) - PI / 2.0).abs(), (width(0.0, 1.0) - PI / 8.0).abs());
    (
        momenta == [0.0, 1.0, 10.0, 100.0] && inexact == 0 && a < 1e-12 && b < 1e-12,
        format!(
            "{} rows, {inexact} with D·W ≠ 2 exactly; |W - π/2| = {a:.1e}, |W - π/8| = {b:.1e}",
            regular.len()
        ),
    )
}

struct WheelerSuite {
    open: DetectorReport,
    closed: DetectorReport,
    delayed: Vec<(f64, DetectorReport, DetectorReport)>,
    secs: f64,
}

fn wheeler_suite(drifts: &mut Drifts) -> WheelerSuite {
    let start = Instant::now();
    let sc = ScenarioConfig::default();
    let base = InterferometerLayout::from_config(&sc, 1.0).unwrap();
    let cal = calibrate_beam_splitter(&base, sc.geometry.wall_height, sc.numerics.dt, sc.numerics.calibration_tolerance).unwrap();
    let layout = base.with_splitter_height(cal.height);
    let mut run = |choice: ChoiceSchedule| {
        let out = run_scenario(
            &layout,
            choice,
            sc.ensemble.trajectories,
            sc.ensemble.seed,
            &sc.numerics,
            sc.ensemble.sampling,
        )
        .unwrap();
        let label = match choice.switch_time() {
            Some(t) => format!("{} {t:.3}", choice.name()),
            None => choice.name().to_string(),
        };
        drifts.0.push((format!("wheeler {label}"), out.report.norm_drift));
        out.report
    };
    let open = run(ChoiceSchedule::Open);
    let closed = run(ChoiceSchedule::Closed);
    let (lo, hi) = layout.choice_window();
    let delayed = [0.2, 0.5, 0.8]
        .iter()
        .map(|s| {
            let t_c = lo + s * (hi - lo);
            (t_c, run(ChoiceSchedule::DelayedInsert(t_c)), run(ChoiceSchedule::DelayedRemove(t_c)))
        })
        .collect();
    WheelerSuite {
        open,
        closed,
        delayed,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn wheeler_open(s: &WheelerSuite) -> Verdict {
    let r = &s.open;
    let m = routing_analysis(r);
    let (p1d2, p2d1) = (m.fraction(Arm::P1, Detector::D2), m.fraction(Arm::P2, Detector::D1));
    let ok = (r.fraction_d1() - 0.5).abs() <= 0.02 && (r.fraction_d2() - 0.5).abs() <= 0.02 && p1d2 >= 0.98 && p2d1 >= 0.98;
    (
        ok,
        format!(
            "n = {}, D1 {:.4}, D2 {:.4}, lost {}; P1→D2 {p1d2:.4}, P2→D1 {p2d1:.4}",
            r.n,
            r.fraction_d1(),
            r.fraction_d2(),
            r.n_lost
        ),
    )
}

fn wheeler_closed(s: &WheelerSuite) -> Verdict {
    let r = &s.closed;
    (
        r.fraction_d2() >= 0.98,
        format!("n = {}, D2 {:.4}, D1 {:.4}, lost {}", r.n, r.fraction_d2(), r.fraction_d1(), r.n_lost),
    )
}

fn delayed_choice(s: &WheelerSuite) -> Verdict {
    let gap = |a: &DetectorReport, b: &DetectorReport| {
        (a.fraction_d1() - b.fraction_d1()).abs().max((a.fraction_d2() - b.fraction_d2()).abs())
    };
    let mut ok = s.delayed.len() >= 3 && s.secs < 900.0;
    let mut parts = Vec::new();
    for (t_c, insert, remove) in &s.delayed {
        let (gi, gr) = (gap(insert, &s.closed), gap(remove, &s.open));
        ok &= gi <= 0.01 && gr <= 0.01;
        parts.push(format!("t_c {t_c:.3}: insert Δ {gi:.4}, remove Δ {gr:.4}"));
    }
    (ok, format!("{}; suite {:.0} s", parts.join("; "), s.secs))
}

fn unitarity_and_determinism(drifts: &Drifts, dir: &Path) -> Verdict {
    let (worst_label, worst) = drifts
        .0
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    // The Wheeler case is the quick scenario: fixed splitter height, 200 trajectories.
    let quick_wheeler = Overrides {
        set: vec!["geometry.splitter_height=39.66359984958343".into(), "ensemble.trajectories=200".into()],
        ..Overrides::default()
    };
    let cases = [
        (CommandName::TwoSlit, Overrides::default()),
        (CommandName::Propagate, Overrides::default()),
        (CommandName::Wheeler, quick_wheeler),
    ];
    let mut identical = Vec::new();
    for (cmd, ov) in cases {
        let bytes = |threads: usize| {
            let out = dir.join(format!("{}-{threads}", cmd.as_str()));
            let bundle = run_command(cmd, &ov, &out, Some(threads)).unwrap();
            std::fs::read(bundle.manifest_path()).unwrap()
        };
        identical.push((cmd.as_str(), bytes(1) == bytes(4)));
    }
    let ok = worst < 1e-8 && identical.iter().all(|c| c.1);
    let same: Vec<String> = identical.iter().map(|(c, s)| format!("{c} {}", if *s { "identical" } else { "DIFFER" })).collect();
    (
        ok,
        format!(
            "worst drift {worst:.1e} ({worst_label}) over {} runs; manifests at 1 vs 4 threads: {}",
            drifts.0.len(),
            same.join(", ")
        ),
    )
}

fn report(id: usize, name: &str, verdict: std::thread::Result<Verdict>, failures: &mut usize) {
    let (ok, detail) = verdict.unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    });
    if !ok {
        *failures += 1;
    }
    println!("{} criterion {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut drifts = Drifts::default();
    let mut failures = 0;
    let guard = |f: &mut dyn FnMut() -> Verdict| catch_unwind(AssertUnwindSafe(f));

    let v = guard(&mut || free_packet(&mut drifts));
    report(1, "free-packet oracle", v, &mut failures);
    report(2, "RK4 oracle", guard(&mut rk4_oracle), &mut failures);

    let psi = symmetric_pair();
    let ens = catch_unwind(|| pair_ensemble(sample_initial_conditions_1d(|x| psi.density(x, 0.0), 2000, 1, (-10.0, 10.0)).unwrap(), 1));
    match &ens {
        Ok(ens) => {
            report(3, "non-crossing", guard(&mut || non_crossing(ens)), &mut failures);
            report(4, "histogram reproduction", guard(&mut || histograms(ens)), &mut failures);
        }
        Err(_) => {
            for (id, name) in [(3, "non-crossing"), (4, "histogram reproduction")] {
                report(id, name, Ok((false, "ensemble integration failed".into())), &mut failures);
            }
        }
    }

    let v = guard(&mut || continuity(&mut drifts));
    report(5, "continuity residual", v, &mut failures);
    report(6, "barrier curves", guard(&mut || barrier_curves(&dir.path().join("barrier"))), &mut failures);

    match catch_unwind(AssertUnwindSafe(|| wheeler_suite(&mut drifts))) {
        Ok(suite) => {
            report(7, "Wheeler open", guard(&mut || wheeler_open(&suite)), &mut failures);
            report(8, "Wheeler closed", guard(&mut || wheeler_closed(&suite)), &mut failures);
            report(9, "delayed choice", guard(&mut || delayed_choice(&suite)), &mut failures);
        }
        Err(_) => {
            for (id, name) in [(7, "Wheeler open"), (8, "Wheeler closed"), (9, "delayed choice")] {
                report(id, name, Ok((false, "Wheeler suite failed to run".into())), &mut failures);
            }
        }
    }

    let v = guard(&mut || unitarity_and_determinism(&drifts, dir.path()));
    report(10, "unitarity and determinism", v, &mut failures);

    println!("{} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
