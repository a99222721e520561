//! Documented keys and defaults for every command.

use toml::Value;

use super::config::CommandName;
use crate::wheeler::DEFAULT_SCENARIO;

#[derive(Debug, Clone, PartialEq)]
pub struct KeySpec {
    pub key: &'static str,
    pub default: Value,
    pub doc: &'static str,
    /// Allowed values of a string key; empty for free-form values.
    pub choices: &'static [&'static str],
}

fn key(key: &'static str, default: Value, doc: &'static str) -> KeySpec {
    KeySpec {
        key,
        default,
        doc,
        choices: &[],
    }
}

fn f(v: f64) -> Value {
    Value::Float(v)
}

fn i(v: i64) -> Value {
    Value::Integer(v)
}

fn choice(k: &'static str, default: &str, doc: &'static str, choices: &'static [&'static str]) -> KeySpec {
    KeySpec {
        key: k,
        default: Value::String(default.to_string()),
        doc,
        choices,
    }
}

fn units() -> Vec<KeySpec> {
    vec![
        key("units.hbar", f(1.0), "reduced Planck constant"),
        key("units.mass", f(1.0), "particle mass"),
    ]
}

fn twoslit() -> Vec<KeySpec> {
    let mut s = units();
    s.extend([
        key("packet.sigma0", f(0.5), "initial width of each packet"),
        key("packet.x0", f(5.0), "packets start at -x0 and +x0"),
        key("packet.p0", f(0.0), "momentum magnitude, both packets move toward x = 0"),
        key("time.t_end", f(3.0), "final time; the run starts at t = 0"),
        key("time.dt", f(1e-3), "RK4 step for the trajectories"),
        key("lattice.x_min", f(-10.0), "left edge of the field-map lattice"),
        key("lattice.x_max", f(10.0), "right edge of the field-map lattice"),
        key("lattice.nx", i(401), "lattice points along x"),
        key("lattice.nt", i(61), "lattice rows in time, including both ends"),
        key("ensemble.trajectories", i(2000), "number of Bohmian trajectories"),
        key("ensemble.seed", i(1), "seed of the initial-condition sampler"),
        choice(
            "ensemble.initial",
            "density",
            "density-weighted draws, or evenly spaced over each packet (±3σ)",
            &["density", "uniform"],
        ),
        key("ensemble.strata", i(256), "equal-probability strata of the sampler; 1 gives i.i.d. draws"),
        key("integrator.node_threshold", f(1e-12), "relative density that counts as a node"),
        key("integrator.max_substep_halvings", i(20), "step halvings allowed near a node"),
        key("histogram.bins", i(100), "bins of the endpoint histogram"),
        key("histogram.lo", f(-10.0), "left edge of the histogram"),
        key("histogram.hi", f(10.0), "right edge of the histogram"),
        key("output.trajectory_stride", i(25), "RK4 steps between rows of the trajectory table"),
    ]);
    s
}

fn barrier() -> Vec<KeySpec> {
    let mut s = units();
    s.extend([
        key("packet.sigma0", f(0.5), "initial packet width"),
        key("packet.x0", f(5.0), "initial distance of each packet from x = 0"),
        key(
            "momenta",
            Value::Array(vec![f(0.0), f(1.0), f(10.0), f(100.0)]),
            "momentum magnitudes, one curve each",
        ),
        key("time.t_start", f(0.0), "first time of the lattice"),
        key("time.t_end", f(3.0), "last time of the lattice"),
        key("time.dt", f(0.01), "lattice spacing in time"),
    ]);
    s
}

fn propagate() -> Vec<KeySpec> {
    let mut s = units();
    s.extend([
        key("grid.n", i(256), "points per axis of the square periodic grid"),
        key("grid.lo", f(-16.0), "lower edge of the grid in x and y"),
        key("grid.hi", f(16.0), "upper edge of the grid in x and y"),
        key("packet.x0", f(-2.0), "initial centre, x"),
        key("packet.y0", f(0.0), "initial centre, y"),
        key("packet.px", f(2.0), "initial momentum, x"),
        key("packet.py", f(0.0), "initial momentum, y"),
        key("packet.sigma", f(1.0), "initial width along both axes"),
        choice(
            "potential.kind",
            "free",
            "no potential, or V = m ω² r² / 2 about the origin",
            &["free", "harmonic"],
        ),
        key("potential.omega", f(1.0), "harmonic angular frequency"),
        key("time.t_end", f(1.0), "final time; one harmonic period is 2π/ω"),
        key("time.dt", f(1e-3), "split-operator step"),
        key("output.snapshots", i(5), "evenly spaced snapshots, including both ends"),
        key("output.norm_interval", i(10), "steps between norm-log rows"),
    ]);
    s
}

const WHEELER_DOCS: &[(&str, &str)] = &[
    ("units.hbar", "reduced Planck constant"),
    ("units.mass", "particle mass"),
    ("grid.n", "points per axis of the square grid"),
    ("grid.lo", "lower edge of the grid in x and y"),
    ("grid.hi", "upper edge of the grid in x and y"),
    ("source.distance", "packet starts this far left of BS1"),
    ("source.wavenumber", "mean wavenumber along +x"),
    ("source.sigma", "initial packet width"),
    ("geometry.arm_length", "BS1 to mirror distance (snapped to whole cells)"),
    ("geometry.splitter_thickness", "beam-splitter slab thickness"),
    ("geometry.splitter_length", "beam-splitter slab length"),
    ("geometry.splitter_height", "beam-splitter barrier height; 0 calibrates to 50% transmission"),
    ("geometry.mirror_thickness", "mirror slab thickness"),
    ("geometry.mirror_length", "mirror slab length"),
    ("geometry.wall_height", "mirror potential height"),
    ("detectors.margin", "detectors begin this far past the BS2 site"),
    ("numerics.dt", "split-operator step"),
    ("numerics.capture_fraction", "stop once this fraction of the density is in the detectors"),
    ("numerics.time_cap", "give up after this time"),
    ("numerics.node_threshold", "relative density that counts as a node"),
    ("numerics.max_substep_halvings", "step halvings allowed near a node"),
    ("numerics.calibration_tolerance", "target |T - 0.5| of the splitter calibration"),
    ("numerics.check_interval", "steps between capture and norm checks"),
    ("ensemble.trajectories", "number of Bohmian trajectories"),
    ("ensemble.seed", "seed of the initial-condition sampler"),
    ("ensemble.sampling", "2D initial-condition sampler"),
    ("choice.mode", "configuration choice"),
    ("choice.switch_time", "BS2 switching time of the delayed modes; 0 picks the middle of the valid window"),
];

fn wheeler_choices(key: &str) -> &'static [&'static str] {
    match key {
        "ensemble.sampling" => &["stratified", "rejection"],
        "choice.mode" => &["open", "closed", "delayed_insert", "delayed_remove"],
        _ => &[],
    }
}

fn wheeler() -> Vec<KeySpec> {
    let defaults = super::config::parse_document(DEFAULT_SCENARIO, "default scenario").expect("shipped scenario parses");
    let mut s: Vec<KeySpec> = WHEELER_DOCS
        .iter()
        .map(|&(k, doc)| {
            let default = defaults
                .iter()
                .find(|d| d.0 == k)
                .map(|d| d.1.clone())
                .unwrap_or_else(|| panic!("default scenario lacks `{k}`"));
            KeySpec {
                key: k,
                default,
                doc,
                choices: wheeler_choices(k),
            }
        })
        .collect();
    s.push(key("output.trajectory_stride", i(20), "field steps between rows of the trajectory table"));
    s
}

/// Every key accepted by `command`, in listing order.
pub fn schema(command: CommandName) -> Vec<KeySpec> {
    match command {
        CommandName::TwoSlit => twoslit(),
        CommandName::Barrier => barrier(),
        CommandName::Wheeler => wheeler(),
        CommandName::Propagate => propagate(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wheeler_schema_covers_the_default_scenario() {
        let entries = super::super::config::parse_document(DEFAULT_SCENARIO, "default").unwrap();
        let keys: Vec<&str> = WHEELER_DOCS.iter().map(|d| d.0).collect();
        assert_eq!(entries.len(), keys.len());
        for e in &entries {
            assert!(keys.contains(&e.0.as_str()), "undocumented scenario key {}", e.0);
        }
    }

    #[test]
    fn keys_are_unique_and_documented() {
        for c in CommandName::ALL {
            let s = schema(c);
            for (n, k) in s.iter().enumerate() {
                assert!(!k.doc.is_empty());
                assert!(s[n + 1..].iter().all(|o| o.key != k.key), "{c}: duplicate {}", k.key);
            }
        }
    }
}
