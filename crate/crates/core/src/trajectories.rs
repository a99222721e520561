//! Bohmian trajectories: streamlines of the velocity field integrated with
//! classical RK4 on a fixed outer time grid.
//!
//! When an RK4 stage lands in a node region the outer step is covered with
//! halved substeps (up to [`IntegratorConfig::max_substep_halvings`] times);
//! the timestamps shared by an ensemble never change.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::AnalyticSuperposition;
use crate::fields::FieldError;

pub type Point<const D: usize> = [f64; D];

/// A sampler of the velocity field `v(r, t)`.
///
/// Implementations must be shareable across threads for read-only sampling.
pub trait VelocityFieldSource<const D: usize>: Sync {
    /// Velocity at `pos`; `Err(FieldError::Node)` where the relative density
    /// drops below `node_threshold`.
    fn velocity(&self, pos: &Point<D>, t: f64, node_threshold: f64) -> Result<Point<D>, FieldError>;

    /// Whether `pos` lies inside the source's spatial domain.
    fn contains(&self, _pos: &Point<D>) -> bool {
        true
    }
}

/// Closed-form sources flag a node where interference cancels the amplitude:
/// `|Ψ|² < threshold · (Σ_k |c_k g_k|)²`.
impl VelocityFieldSource<1> for AnalyticSuperposition {
    fn velocity(&self, pos: &Point<1>, t: f64, node_threshold: f64) -> Result<Point<1>, FieldError> {
        let (v, coherence) = self.velocity_scaled(pos[0], t);
        if !(coherence >= node_threshold) || !v.is_finite() {
            return Err(FieldError::Node {
                density: coherence,
                threshold: node_threshold,
            });
        }
        Ok([v])
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("could not escape a node region near t = {t} after {halvings} substep halvings")]
    NodePersist { t: f64, halvings: u32 },
    #[error("integration interval must satisfy t1 > t0 (got {t0}..{t1})")]
    EmptyInterval { t0: f64, t1: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("density mass {mass:e} inside the sampling domain is below 1e-6")]
    Domain { mass: f64 },
    #[error("invalid sampling request: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistogramError {
    #[error("bin edges must be at least two strictly increasing finite values")]
    EmptyBins,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Relative density below which a stage counts as landing in a node.
    pub node_threshold: f64,
    pub max_substep_halvings: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            node_threshold: 1e-12,
            max_substep_halvings: 20,
        }
    }
}

impl IntegratorConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(TrajectoryError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.node_threshold > 0.0 && self.node_threshold < 1.0) {
            return Err(TrajectoryError::InvalidConfig(format!(
                "node_threshold must lie in (0, 1), got {}",
                self.node_threshold
            )));
        }
        if self.max_substep_halvings > 60 {
            return Err(TrajectoryError::InvalidConfig(
                "max_substep_halvings must not exceed 60".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrajectoryStatus {
    Completed,
    /// Completed, but at least one outer step needed substep halving.
    NodeRescued,
    /// Left the source's spatial domain; positions stop at the exit.
    Absorbed,
    /// Substep halving could not escape a node; positions stop there.
    NodeStalled,
}

impl TrajectoryStatus {
    pub fn is_complete(&self) -> bool {
        matches!(self, Self::Completed | Self::NodeRescued)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::NodeRescued => "node_rescued",
            Self::Absorbed => "absorbed",
            Self::NodeStalled => "node_stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub positions: Vec<Point<D>>,
    pub status: TrajectoryStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble<const D: usize> {
    pub timestamps: Vec<f64>,
    pub positions: Vec<Vec<Point<D>>>,
    pub seed: u64,
    pub flags: Vec<TrajectoryStatus>,
}

impl<const D: usize> TrajectoryEnsemble<D> {
    pub fn empty(timestamps: Vec<f64>, seed: u64) -> Self {
        Self {
            timestamps,
            positions: Vec::new(),
            seed,
            flags: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, trajectory: Trajectory<D>) {
        self.positions.push(trajectory.positions);
        self.flags.push(trajectory.status);
    }

    /// Index of the stored timestamp closest to `t`.
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        nearest_index(&self.timestamps, t)
    }

    /// Final stored position of every trajectory.
    pub fn endpoints(&self) -> Vec<Point<D>> {
        self.positions
            .iter()
            .filter_map(|p| p.last().copied())
            .collect()
    }
}

pub(crate) fn nearest_index(times: &[f64], t: f64) -> Option<usize> {
    if times.is_empty() {
        return None;
    }
    let idx = times.partition_point(|&s| s < t);
    if idx == 0 {
        return Some(0);
    }
    if idx == times.len() {
        return Some(times.len() - 1);
    }
    if (times[idx] - t).abs() < (t - times[idx - 1]).abs() {
        Some(idx)
    } else {
        Some(idx - 1)
    }
}

/// Outer time grid `t0, t0+dt, …, t1` (the last step is shortened if needed).
pub fn time_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let span = t1 - t0;
    let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt).collect();
    times.push(t1);
    times
}

#[inline]
fn axpy<const D: usize>(x: &Point<D>, a: f64, v: &Point<D>) -> Point<D> {
    let mut out = *x;
    for d in 0..D {
        out[d] += a * v[d];
    }
    out
}

/// One classical RK4 step of size `h`.
pub fn rk4_step<const D: usize, S: VelocityFieldSource<D> + ?Sized>(
    source: &S,
    x: &Point<D>,
    t: f64,
    h: f64,
    node_threshold: f64,
) -> Result<Point<D>, FieldError> {
    let k1 = source.velocity(x, t, node_threshold)?;
    let k2 = source.velocity(&axpy(x, 0.5 * h, &k1), t + 0.5 * h, node_threshold)?;
    let k3 = source.velocity(&axpy(x, 0.5 * h, &k2), t + 0.5 * h, node_threshold)?;
    let k4 = source.velocity(&axpy(x, h, &k3), t + h, node_threshold)?;
    let mut out = *x;
    for d in 0..D {
        out[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
    }
    Ok(out)
}

/// Outcome of covering one outer step.
pub(crate) enum StepOutcome<const D: usize> {
    Moved { position: Point<D>, rescued: bool },
    Stalled,
}

/// Covers `[t, t + dt]` with RK4 substeps `dt/2^d`, refining where stages
/// hit nodes and coarsening again once past them.
pub(crate) fn advance_outer_step<const D: usize, S: VelocityFieldSource<D> + ?Sized>(
    source: &S,
    x: &Point<D>,
    t: f64,
    dt: f64,
    config: &IntegratorConfig,
) -> StepOutcome<D> {
    let mut pos = *x;
    let mut depth: u32 = 0;
    // Progress `k` counts substeps of size dt/2^depth already taken.
    let mut k: u64 = 0;
    let mut rescued = false;
    loop {
        let parts = 1u64 << depth;
        if k == parts {
            return StepOutcome::Moved {
                position: pos,
                rescued,
            };
        }
        let h = dt / parts as f64;
        let ts = t + dt * (k as f64 / parts as f64);
        match rk4_step(source, &pos, ts, h, config.node_threshold) {
            Ok(next) => {
                pos = next;
                k += 1;
                while depth > 0 && k.is_multiple_of(2) {
                    depth -= 1;
                    k /= 2;
                }
            }
            Err(_) => {
                if depth >= config.max_substep_halvings {
                    return StepOutcome::Stalled;
                }
                rescued = true;
                depth += 1;
                k *= 2;
            }
        }
    }
}

/// Integrates one streamline from `x0` at `t0` to `t1`.
pub fn integrate_trajectory<const D: usize, S: VelocityFieldSource<D> + ?Sized>(
    source: &S,
    x0: Point<D>,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory<D>, TrajectoryError> {
    config.validate()?;
    if !(t1 > t0) {
        return Err(TrajectoryError::EmptyInterval { t0, t1 });
    }
    let times = time_grid(t0, t1, config.dt);
    let traj = integrate_on_grid(source, x0, &times, config);
    if traj.status == TrajectoryStatus::NodeStalled {
        let t = times[traj.positions.len() - 1];
        return Err(TrajectoryError::NodePersist {
            t,
            halvings: config.max_substep_halvings,
        });
    }
    Ok(traj)
}

fn integrate_on_grid<const D: usize, S: VelocityFieldSource<D> + ?Sized>(
    source: &S,
    x0: Point<D>,
    times: &[f64],
    config: &IntegratorConfig,
) -> Trajectory<D> {
    let mut positions = Vec::with_capacity(times.len());
    positions.push(x0);
    let mut status = TrajectoryStatus::Completed;
    if !source.contains(&x0) {
        return Trajectory {
            positions,
            status: TrajectoryStatus::Absorbed,
        };
    }
    let mut x = x0;
    for w in times.windows(2) {
        match advance_outer_step(source, &x, w[0], w[1] - w[0], config) {
            StepOutcome::Moved { position, rescued } => {
                if rescued {
                    status = TrajectoryStatus::NodeRescued;
                }
                x = position;
                positions.push(x);
                if !source.contains(&x) {
                    return Trajectory {
                        positions,
                        status: TrajectoryStatus::Absorbed,
                    };
                }
            }
            StepOutcome::Stalled => {
                return Trajectory {
                    positions,
                    status: TrajectoryStatus::NodeStalled,
                };
            }
        }
    }
    Trajectory { positions, status }
}

/// Integrates every initial condition independently; failures become flags.
pub fn integrate_ensemble<const D: usize, S: VelocityFieldSource<D> + ?Sized>(
    source: &S,
    initials: &[Point<D>],
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
    seed: u64,
) -> Result<TrajectoryEnsemble<D>, TrajectoryError> {
    config.validate()?;
    if !(t1 > t0) {
        return Err(TrajectoryError::EmptyInterval { t0, t1 });
    }
    let times = time_grid(t0, t1, config.dt);
    let trajectories: Vec<Trajectory<D>> = initials
        .par_iter()
        .map(|x0| integrate_on_grid(source, *x0, &times, config))
        .collect();
    let mut ensemble = TrajectoryEnsemble::empty(times, seed);
    for t in trajectories {
        ensemble.push(t);
    }
    Ok(ensemble)
}

/// Per-trajectory RNG stream derived from `(seed, index)`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Default number of equal-probability strata for 1D inverse-transform sampling.
pub const DEFAULT_STRATA: usize = 256;

/// Inverse-transform sampler over a tabulated cumulative distribution.
#[derive(Debug, Clone)]
pub struct InverseTransformSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    mass: f64,
}

impl InverseTransformSampler {
    pub const TABLE_POINTS: usize = 1 << 16;

    pub fn new<F: Fn(f64) -> f64>(density: F, domain: (f64, f64)) -> Result<Self, SamplingError> {
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(SamplingError::Invalid(format!("bad domain [{a}, {b}]")));
        }
        let n = Self::TABLE_POINTS;
        let h = (b - a) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        let rho: Vec<f64> = xs.iter().map(|&x| density(x).max(0.0)).collect();
        let mut cdf = Vec::with_capacity(n);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in rho.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * h;
            cdf.push(acc);
        }
        if !(acc >= 1e-6) {
            return Err(SamplingError::Domain { mass: acc });
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        Ok(Self { xs, cdf, mass: acc })
    }

    /// Density mass inside the domain.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Position at cumulative probability `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        if c1 > c0 {
            x0 + (u - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }

    /// `n` stratified draws: the unit interval is split into `min(strata, n)`
    /// equal-probability strata with proportional allocation; leftover
    /// samples go to strata picked by a seeded permutation.
    pub fn sample(&self, n: usize, seed: u64, strata: usize) -> Vec<f64> {
        let k = strata.max(1).min(n.max(1));
        let q = n / k;
        let mut extra: Vec<usize> = (0..k).collect();
        extra.shuffle(&mut stream_rng(seed, u64::MAX));
        (0..n)
            .into_par_iter()
            .map(|i| {
                let stratum = if i < q * k { i % k } else { extra[i - q * k] };
                let mut rng = stream_rng(seed, i as u64);
                let u: f64 = rng.random();
                self.quantile((stratum as f64 + u) / k as f64)
            })
            .collect()
    }
}

/// Density-weighted 1D initial conditions (stratified inverse transform).
pub fn sample_initial_conditions_1d<F: Fn(f64) -> f64>(
    density: F,
    n: usize,
    seed: u64,
    domain: (f64, f64),
) -> Result<Vec<f64>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::Invalid("n must be at least 1".into()));
    }
    let sampler = InverseTransformSampler::new(density, domain)?;
    Ok(sampler.sample(n, seed, DEFAULT_STRATA))
}

/// `n` points evenly spaced in the interior of `domain`, ignoring the density.
pub fn uniform_grid_initial_conditions(n: usize, domain: (f64, f64)) -> Vec<f64> {
    let (a, b) = domain;
    (0..n)
        .map(|i| a + (i as f64 + 0.5) * (b - a) / n as f64)
        .collect()
}

/// Density-weighted 2D initial conditions by rejection against `peak`.
///
/// Each sample draws from its own `(seed, index)` stream, so the result does
/// not depend on scheduling.
pub fn sample_initial_conditions_2d<F: Fn(Point<2>) -> f64 + Sync>(
    density: F,
    n: usize,
    seed: u64,
    rect: [(f64, f64); 2],
    peak: f64,
) -> Result<Vec<Point<2>>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::Invalid("n must be at least 1".into()));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(SamplingError::Invalid(format!("peak density must be positive, got {peak}")));
    }
    let [(x0, x1), (y0, y1)] = rect;
    if !(x1 > x0 && y1 > y0) {
        return Err(SamplingError::Invalid("degenerate sampling rectangle".into()));
    }
    // Coarse mass estimate guards against an empty domain.
    let m = 128;
    let (hx, hy) = ((x1 - x0) / m as f64, (y1 - y0) / m as f64);
    let mut mass = 0.0;
    for i in 0..m {
        for j in 0..m {
            mass += density([x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy]);
        }
    }
    mass *= hx * hy;
    if !(mass >= 1e-6) {
        return Err(SamplingError::Domain { mass });
    }
    const MAX_TRIES: usize = 10_000_000;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            for _ in 0..MAX_TRIES {
                let p = [x0 + rng.random::<f64>() * (x1 - x0), y0 + rng.random::<f64>() * (y1 - y0)];
                let u: f64 = rng.random();
                if u * peak < density(p) {
                    return Ok(p);
                }
            }
            Err(SamplingError::Domain { mass })
        })
        .collect()
}

/// Cell `(x, y)` visited at position `d` of the Hilbert curve on a
/// `2^order × 2^order` grid.
fn hilbert_cell(order: u32, mut d: u64) -> (u64, u64) {
    let n = 1u64 << order;
    let (mut x, mut y) = (0u64, 0u64);
    let mut s = 1u64;
    while s < n {
        let rx = 1 & (d / 2);
        let ry = 1 & (d ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        d /= 4;
        s *= 2;
    }
    (x, y)
}

/// Density-weighted 2D initial conditions with one stratum per sample.
///
/// The rectangle is tabulated on a `2^order` square grid of cells, the cells
/// are chained along a Hilbert curve and the resulting 1D cumulative mass is
/// sampled with `n` equal-mass strata. Each stratum is a compact patch of the
/// plane, so counts inside any smooth region fluctuate far less than with
/// independent draws.
pub fn sample_initial_conditions_2d_stratified<F: Fn(Point<2>) -> f64 + Sync>(
    density: F,
    n: usize,
    seed: u64,
    rect: [(f64, f64); 2],
    order: u32,
) -> Result<Vec<Point<2>>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::Invalid("n must be at least 1".into()));
    }
    if !(1..=12).contains(&order) {
        return Err(SamplingError::Invalid(format!("table order must be in 1..=12, got {order}")));
    }
    let [(x0, x1), (y0, y1)] = rect;
    if !(x1 > x0 && y1 > y0) {
        return Err(SamplingError::Invalid("degenerate sampling rectangle".into()));
    }
    let side = 1u64 << order;
    let (hx, hy) = ((x1 - x0) / side as f64, (y1 - y0) / side as f64);
    let cells: Vec<(u64, u64)> = (0..side * side).map(|d| hilbert_cell(order, d)).collect();
    let masses: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let rho = density([x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy]);
            if rho.is_finite() && rho > 0.0 {
                rho * hx * hy
            } else {
                0.0
            }
        })
        .collect();
    let mut cumulative = Vec::with_capacity(masses.len() + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for m in &masses {
        acc += m;
        cumulative.push(acc);
    }
    if !(acc >= 1e-6) {
        return Err(SamplingError::Domain { mass: acc });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let target = (i as f64 + rng.random::<f64>()) / n as f64 * acc;
            // First cell whose upper cumulative bound exceeds the target.
            let c = cumulative[1..]
                .partition_point(|&m| m <= target)
                .min(cells.len() - 1);
            let (ci, cj) = cells[c];
            [
                x0 + (ci as f64 + rng.random::<f64>()) * hx,
                y0 + (cj as f64 + rng.random::<f64>()) * hy,
            ]
        })
        .collect())
}

/// Hyperplane `normal · r = offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary<const D: usize> {
    pub normal: Point<D>,
    pub offset: f64,
}

impl Boundary<1> {
    pub fn point(x: f64) -> Self {
        Self {
            normal: [1.0],
            offset: x,
        }
    }
}

impl<const D: usize> Boundary<D> {
    pub fn signed_distance(&self, r: &Point<D>) -> f64 {
        let mut s = -self.offset;
        for d in 0..D {
            s += self.normal[d] * r[d];
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingReport {
    pub violations: usize,
    /// Trajectories with at least one crossing.
    pub trajectories_crossing: usize,
    pub min_distance: f64,
}

/// Counts strict sign changes of the signed distance along each trajectory.
/// Touching the boundary (distance exactly 0) is not a crossing.
pub fn check_non_crossing<const D: usize>(
    ensemble: &TrajectoryEnsemble<D>,
    boundary: &Boundary<D>,
) -> CrossingReport {
    let mut violations = 0;
    let mut trajectories_crossing = 0;
    let mut min_distance = f64::INFINITY;
    for path in &ensemble.positions {
        let mut last_sign = 0.0f64;
        let mut crossed = false;
        for r in path {
            let s = boundary.signed_distance(r);
            min_distance = min_distance.min(s.abs());
            if s != 0.0 {
                let sign = s.signum();
                if last_sign != 0.0 && sign != last_sign {
                    violations += 1;
                    crossed = true;
                }
                last_sign = sign;
            }
        }
        if crossed {
            trajectories_crossing += 1;
        }
    }
    CrossingReport {
        violations,
        trajectories_crossing,
        min_distance,
    }
}

fn validate_edges(edges: &[f64]) -> Result<(), HistogramError> {
    if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HistogramError::EmptyBins);
    }
    Ok(())
}

/// Uniform bin edges.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Bin index of `x`; the last bin is closed on the right.
fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[last]) {
        return None;
    }
    let i = edges.partition_point(|&e| e <= x);
    Some(i.saturating_sub(1).min(last - 1))
}

/// Histogram of 1D positions at the stored timestamp nearest `t`,
/// normalised to unit mass over the binned domain.
pub fn ensemble_histogram(
    ensemble: &TrajectoryEnsemble<1>,
    t: f64,
    edges: &[f64],
) -> Result<Vec<f64>, HistogramError> {
    validate_edges(edges)?;
    let mut counts = vec![0.0; edges.len() - 1];
    let Some(idx) = ensemble.nearest_index(t) else {
        return Ok(counts);
    };
    let mut total = 0.0;
    for path in &ensemble.positions {
        if let Some(r) = path.get(idx) {
            if let Some(b) = bin_of(edges, r[0]) {
                counts[b] += 1.0;
                total += 1.0;
            }
        }
    }
    if total > 0.0 {
        for c in counts.iter_mut() {
            *c /= total;
        }
    }
    Ok(counts)
}

/// Bin masses of a density by composite Simpson quadrature, normalised to
/// unit mass over the binned domain.
pub fn binned_density<F: Fn(f64) -> f64>(
    density: F,
    edges: &[f64],
    panels_per_bin: usize,
) -> Result<Vec<f64>, HistogramError> {
    validate_edges(edges)?;
    let m = panels_per_bin.max(2).div_ceil(2) * 2;
    let mut masses: Vec<f64> = edges
        .windows(2)
        .map(|w| {
            let h = (w[1] - w[0]) / m as f64;
            let mut acc = density(w[0]) + density(w[1]);
            for i in 1..m {
                let wgt = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += wgt * density(w[0] + i as f64 * h);
            }
            acc * h / 3.0
        })
        .collect();
    let total: f64 = masses.iter().sum();
    if total > 0.0 {
        for v in masses.iter_mut() {
            *v /= total;
        }
    }
    Ok(masses)
}

/// `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// True iff the rank order of positions is the same at every timestamp.
/// Only trajectories stored over the full timestamp range take part.
pub fn ordering_preserved(ensemble: &TrajectoryEnsemble<1>) -> bool {
    let n_t = ensemble.timestamps.len();
    let full: Vec<&Vec<Point<1>>> = ensemble
        .positions
        .iter()
        .filter(|p| p.len() == n_t)
        .collect();
    if full.len() < 2 || n_t == 0 {
        return true;
    }
    let mut order: Vec<usize> = (0..full.len()).collect();
    order.sort_by(|&a, &b| full[a][0][0].total_cmp(&full[b][0][0]));
    for step in 0..n_t {
        for w in order.windows(2) {
            let (a, b) = (full[w[0]][0][0], full[w[1]][0][0]);
            let (pa, pb) = (full[w[0]][step][0], full[w[1]][step][0]);
            if a == b {
                if pa != pb {
                    return false;
                }
            } else if pa > pb {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{two_slit_model, GaussianPacket};
    use crate::fields::PhysicalUnits;

    fn single(center: f64, p: f64) -> AnalyticSuperposition {
        AnalyticSuperposition::new(
            vec![GaussianPacket::new(center, p, 0.5, 1.0).unwrap()],
            PhysicalUnits::default(),
            true,
        )
        .unwrap()
    }

    struct Uniform(f64);
    impl VelocityFieldSource<1> for Uniform {
        fn velocity(&self, _: &Point<1>, _: f64, _: f64) -> Result<Point<1>, FieldError> {
            Ok([self.0])
        }
        fn contains(&self, pos: &Point<1>) -> bool {
            pos[0].abs() < 1.0
        }
    }

    /// A short velocity burst makes coarse RK4 stages overshoot into a node
    /// band that the true path never reaches.
    struct BurstWithNodeAhead;
    impl VelocityFieldSource<1> for BurstWithNodeAhead {
        fn velocity(&self, pos: &Point<1>, t: f64, thr: f64) -> Result<Point<1>, FieldError> {
            if (1.4..1.6).contains(&pos[0]) {
                return Err(FieldError::Node {
                    density: 0.0,
                    threshold: thr,
                });
            }
            Ok([if (t - 0.55).abs() < 0.01 { 10.0 } else { 1.0 }])
        }
    }

    struct AlwaysNode;
    impl VelocityFieldSource<1> for AlwaysNode {
        fn velocity(&self, _: &Point<1>, _: f64, thr: f64) -> Result<Point<1>, FieldError> {
            Err(FieldError::Node {
                density: 0.0,
                threshold: thr,
            })
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::with_dt(0.0).validate().is_err());
        let mut c = IntegratorConfig::default();
        c.node_threshold = 1.0;
        assert!(c.validate().is_err());
        assert!(IntegratorConfig::default().validate().is_ok());
    }

    #[test]
    fn time_grid_ends_exactly() {
        let g = time_grid(0.0, 1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = time_grid(0.0, 1.0, 0.25);
        assert_eq!(g.len(), 5);
    }

    #[test]
    fn centroid_trajectory_follows_group_velocity() {
        let sup = single(-1.0, 2.0);
        let cfg = IntegratorConfig::with_dt(1e-3);
        let tr = integrate_trajectory(&sup, [-1.0], 0.0, 1.0, &cfg).unwrap();
        for (i, r) in tr.positions.iter().enumerate() {
            let t = i as f64 * 1e-3;
            assert!((r[0] - (-1.0 + 2.0 * t)).abs() < 1e-8);
        }
    }

    #[test]
    fn symmetric_axis_is_invariant() {
        let sup = two_slit_model(0.5, 5.0, 0.0, PhysicalUnits::default()).unwrap();
        let tr = integrate_trajectory(&sup, [0.0], 0.0, 3.0, &IntegratorConfig::with_dt(1e-2)).unwrap();
        assert!(tr.positions.iter().all(|r| r[0].abs() < 1e-12));
    }

    #[test]
    fn substep_halving_rescues_grazing_stage() {
        let cfg = IntegratorConfig::with_dt(0.1);
        let tr = integrate_trajectory(&BurstWithNodeAhead, [0.0], 0.0, 1.0, &cfg).unwrap();
        assert_eq!(tr.status, TrajectoryStatus::NodeRescued);
        assert_eq!(tr.positions.len(), 11);
        let end = tr.positions.last().unwrap()[0];
        assert!(end > 1.0 && end < 1.4, "{end}");
    }

    #[test]
    fn persistent_node_is_an_error() {
        let cfg = IntegratorConfig {
            dt: 0.1,
            node_threshold: 1e-12,
            max_substep_halvings: 4,
        };
        let err = integrate_trajectory(&AlwaysNode, [0.0], 0.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, TrajectoryError::NodePersist { halvings: 4, .. }));
        let ens = integrate_ensemble(&AlwaysNode, &[[0.0]], 0.0, 1.0, &cfg, 0).unwrap();
        assert_eq!(ens.flags[0], TrajectoryStatus::NodeStalled);
        assert_eq!(ens.positions[0].len(), 1);
    }

    #[test]
    fn leaving_the_domain_absorbs() {
        let tr = integrate_trajectory(&Uniform(1.0), [0.0], 0.0, 2.0, &IntegratorConfig::with_dt(0.1)).unwrap();
        assert_eq!(tr.status, TrajectoryStatus::Absorbed);
        assert!(tr.positions.len() < 21);
    }

    #[test]
    fn empty_ensemble() {
        let sup = single(0.0, 0.0);
        let ens = integrate_ensemble::<1, _>(&sup, &[], 0.0, 1.0, &IntegratorConfig::with_dt(0.1), 3).unwrap();
        assert!(ens.is_empty());
        assert_eq!(ens.timestamps.len(), 11);
    }

    #[test]
    fn ensemble_matches_individual_runs() {
        let sup = two_slit_model(0.5, 5.0, 1.0, PhysicalUnits::default()).unwrap();
        let cfg = IntegratorConfig::with_dt(5e-3);
        let initials = [[-5.3], [-4.9], [4.4], [5.6]];
        let ens = integrate_ensemble(&sup, &initials, 0.0, 1.0, &cfg, 0).unwrap();
        for (x0, path) in initials.iter().zip(&ens.positions) {
            let single = integrate_trajectory(&sup, *x0, 0.0, 1.0, &cfg).unwrap();
            assert_eq!(&single.positions, path);
        }
    }

    #[test]
    fn sampler_is_deterministic_and_within_support() {
        let sup = two_slit_model(0.5, 5.0, 0.0, PhysicalUnits::default()).unwrap();
        let a = sample_initial_conditions_1d(|x| sup.density(x, 0.0), 1000, 7, (-10.0, 10.0)).unwrap();
        let b = sample_initial_conditions_1d(|x| sup.density(x, 0.0), 1000, 7, (-10.0, 10.0)).unwrap();
        assert_eq!(a, b);
        let c = sample_initial_conditions_1d(|x| sup.density(x, 0.0), 1000, 8, (-10.0, 10.0)).unwrap();
        assert_ne!(a, c);
        let one = sample_initial_conditions_1d(|x| sup.density(x, 0.0), 1, 7, (-10.0, 10.0)).unwrap();
        assert_eq!(one.len(), 1);
        assert!(sup.density(one[0], 0.0) > 0.0);
    }

    #[test]
    fn sampler_rejects_empty_domain() {
        let err = sample_initial_conditions_1d(|x| (-x * x).exp(), 10, 1, (50.0, 60.0)).unwrap_err();
        assert!(matches!(err, SamplingError::Domain { .. }));
    }

    #[test]
    fn sampler_2d_respects_rectangle() {
        let rho = |p: Point<2>| (-(p[0] * p[0] + p[1] * p[1])).exp() / std::f64::consts::PI;
        let pts = sample_initial_conditions_2d(rho, 500, 3, [(-4.0, 4.0), (-4.0, 4.0)], 1.0 / std::f64::consts::PI).unwrap();
        assert_eq!(pts.len(), 500);
        let mean_r2: f64 = pts.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / 500.0;
        assert!((mean_r2 - 1.0).abs() < 0.15, "{mean_r2}");
        let again = sample_initial_conditions_2d(rho, 500, 3, [(-4.0, 4.0), (-4.0, 4.0)], 1.0 / std::f64::consts::PI).unwrap();
        assert_eq!(pts, again);
    }

    #[test]
    fn hilbert_curve_visits_every_cell_once() {
        let mut seen = vec![false; 64];
        for d in 0..64 {
            let (x, y) = hilbert_cell(3, d);
            assert!(!seen[(y * 8 + x) as usize]);
            seen[(y * 8 + x) as usize] = true;
            if d > 0 {
                let (px, py) = hilbert_cell(3, d - 1);
                assert_eq!(px.abs_diff(x) + py.abs_diff(y), 1);
            }
        }
    }

    #[test]
    fn stratified_2d_sampler_balances_half_planes() {
        let rho = |p: Point<2>| (-(p[0] * p[0] + p[1] * p[1])).exp();
        let rect = [(-5.0, 5.0), (-5.0, 5.0)];
        let pts = sample_initial_conditions_2d_stratified(rho, 2000, 11, rect, 8).unwrap();
        assert_eq!(pts.len(), 2000);
        let above = pts.iter().filter(|p| p[0] - p[1] > 0.3).count() as f64 / 2000.0;
        // Mass of x - y > 0.3 for this density is Φ(-0.3) ≈ 0.382.
        assert!((above - 0.3821).abs() < 0.005, "{above}");
        assert_eq!(pts, sample_initial_conditions_2d_stratified(rho, 2000, 11, rect, 8).unwrap());
        let err = sample_initial_conditions_2d_stratified(rho, 10, 1, [(40.0, 50.0), (40.0, 50.0)], 6);
        assert!(matches!(err, Err(SamplingError::Domain { .. })));
    }

    fn manual_ensemble(paths: Vec<Vec<f64>>) -> TrajectoryEnsemble<1> {
        let n = paths[0].len();
        let mut e = TrajectoryEnsemble::empty((0..n).map(|i| i as f64).collect(), 0);
        for p in paths {
            e.push(Trajectory {
                positions: p.into_iter().map(|x| [x]).collect(),
                status: TrajectoryStatus::Completed,
            });
        }
        e
    }

    #[test]
    fn crossing_detector() {
        let e = manual_ensemble(vec![vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]]);
        assert_eq!(check_non_crossing(&e, &Boundary::point(0.0)).violations, 0);
        let e = manual_ensemble(vec![vec![1.0, 2.0, -2.0, -3.0], vec![-1.0, -1.0, 0.0, -1.0]]);
        let r = check_non_crossing(&e, &Boundary::point(0.0));
        assert_eq!(r.violations, 1);
        assert_eq!(r.trajectories_crossing, 1);
        assert_eq!(r.min_distance, 0.0);
    }

    #[test]
    fn ordering_detector() {
        let e = manual_ensemble(vec![vec![0.0, 1.0, 2.0], vec![0.5, 1.5, 2.5]]);
        assert!(ordering_preserved(&e));
        let e = manual_ensemble(vec![vec![0.3, 0.4], vec![0.3, 0.4]]);
        assert!(ordering_preserved(&e));
        let e = manual_ensemble(vec![vec![0.0, 1.0, 3.0], vec![0.5, 1.5, 2.5]]);
        assert!(!ordering_preserved(&e));
    }

    #[test]
    fn histogram_of_single_trajectory() {
        let e = manual_ensemble(vec![vec![0.1, 0.25]]);
        let edges = uniform_edges(0.0, 1.0, 4);
        let h = ensemble_histogram(&e, 1.0, &edges).unwrap();
        assert_eq!(h, vec![0.0, 1.0, 0.0, 0.0]);
        assert!(ensemble_histogram(&e, 0.0, &[1.0]).is_err());
        assert!(ensemble_histogram(&e, 0.0, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn binned_density_of_uniform() {
        let m = binned_density(|_| 1.0, &uniform_edges(0.0, 2.0, 4), 8).unwrap();
        for v in m {
            assert!((v - 0.25).abs() < 1e-14);
        }
    }
}
