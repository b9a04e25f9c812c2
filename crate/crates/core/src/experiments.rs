//! Monte Carlo experiments with deterministic parallel trials.
//!
//! Trial `i` of a run uses the seed `derive_trial_seed(master, i)` for both
//! its edge-weight field and its vertex noise. Trials run on a rayon pool
//! but results are collected in trial order and folded sequentially, so
//! aggregates do not depend on the thread count.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FppError, Result};
use crate::lattice::{policy_half_width, Vertex, Window};
use crate::metric::partial_tree;
use crate::stats::{fit_power_law, pooled_se, proportion_se, quantile, wilson_interval, LineFit, Summary, Z95};
use crate::weights::{derive_trial_seed, EdgeWeightField, WeightDistribution};

/// Parameters shared by every experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExperimentSettings {
    pub distribution: WeightDistribution,
    pub master_seed: u64,
    pub trials: usize,
    /// Worker threads; 0 uses rayon's default.
    pub threads: usize,
}

impl ExperimentSettings {
    pub fn new(distribution: WeightDistribution, master_seed: u64, trials: usize) -> Self {
        Self {
            distribution,
            master_seed,
            trials,
            threads: 0,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn field(&self, seed: u64) -> Result<EdgeWeightField> {
        EdgeWeightField::new(seed, self.distribution)
    }

    fn check(&self) -> Result<()> {
        self.distribution.validate()?;
        if self.trials == 0 {
            return Err(FppError::Config("trials must be positive".into()));
        }
        Ok(())
    }
}

/// Per-trial outputs in trial order.
#[derive(Clone, Debug)]
pub struct TrialRun<T> {
    pub seeds: Vec<u64>,
    pub outputs: Vec<T>,
    pub wall_clock_secs: f64,
    pub threads: usize,
}

/// Runs `count` trials of `task(index, seed)` with seeds derived from
/// `master`. The first failing or panicking trial (by index) is reported
/// with its seed.
pub fn run_trials<T, F>(master: u64, count: usize, threads: usize, task: F) -> Result<TrialRun<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync,
{
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FppError::Config(format!("cannot start worker pool: {e}")))?;
    let used = pool.current_num_threads();
    let seeds: Vec<u64> = (0..count as u64).map(|i| derive_trial_seed(master, i)).collect();
    let results: Vec<Result<T>> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, &seed)| {
                let index = i as u64;
                match catch_unwind(AssertUnwindSafe(|| task(index, seed))) {
                    Ok(Ok(v)) => Ok(v),
                    Ok(Err(e)) => Err(FppError::Trial {
                        index,
                        seed,
                        message: e.to_string(),
                    }),
                    Err(panic) => Err(FppError::Trial {
                        index,
                        seed,
                        message: panic_message(&panic),
                    }),
                }
            })
            .collect()
    });
    let outputs = results.into_iter().collect::<Result<Vec<T>>>()?;
    Ok(TrialRun {
        seeds,
        outputs,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        threads: used,
    })
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = p.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".into()
    }
}

/// Aggregate with run metadata.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult<A> {
    pub config_hash: String,
    pub master_seed: u64,
    pub trial_seeds: Vec<u64>,
    pub aggregate: A,
    pub wall_clock_secs: f64,
    pub threads: usize,
}

/// `m` equally spaced angles starting at 0.
pub fn direction_grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| i as f64 * TAU / m as f64).collect()
}

fn target(r: f64, theta: f64) -> Vertex {
    Vertex::nearest(r * theta.cos(), r * theta.sin())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeCell {
    pub angle: f64,
    pub radius: f64,
    pub target: Vertex,
    pub mean_time: f64,
    pub se_time: f64,
    /// `mean T / |target|`.
    pub mu: f64,
    pub mu_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeEstimate {
    pub distribution: WeightDistribution,
    pub angles: Vec<f64>,
    pub radii: Vec<f64>,
    /// Direction-major: cell `i * radii.len() + j` is angle `i`, radius `j`.
    pub cells: Vec<ShapeCell>,
    /// `μ̂` per direction at the largest radius.
    pub mu_hat: Vec<f64>,
    pub mu_se: Vec<f64>,
    pub trials: usize,
}

impl ShapeEstimate {
    pub fn cell(&self, angle: usize, radius: usize) -> &ShapeCell {
        &self.cells[angle * self.radii.len() + radius]
    }

    /// `μ̂` at an arbitrary angle, linear between grid directions.
    pub fn mu_at(&self, theta: f64) -> f64 {
        let m = self.angles.len();
        if m == 1 {
            return self.mu_hat[0];
        }
        let t = theta.rem_euclid(TAU);
        let j = self.angles.partition_point(|a| *a <= t).max(1) - 1;
        let (a0, a1) = (self.angles[j], if j + 1 < m { self.angles[j + 1] } else { TAU + self.angles[0] });
        let (m0, m1) = (self.mu_hat[j], self.mu_hat[(j + 1) % m]);
        let s = if a1 > a0 { (t - a0) / (a1 - a0) } else { 0.0 };
        m0 + (m1 - m0) * s
    }

    /// `μ̂(y) = |y| μ̂(angle of y)`.
    pub fn mu_of(&self, y: Vertex) -> f64 {
        if y == Vertex::ORIGIN {
            return 0.0;
        }
        y.norm() * self.mu_at((y.y as f64).atan2(y.x as f64))
    }

    /// Lattice-symmetry comparisons on the direction grid: every direction
    /// against its images under rotation by π/2 and the reflections in the
    /// x-axis and the diagonal, for images that are grid directions.
    pub fn symmetry(&self, tolerance_se: f64) -> SymmetryCheck {
        let mut pairs = Vec::new();
        let m = self.angles.len();
        let find = |theta: f64| {
            let t = theta.rem_euclid(TAU);
            (0..m).find(|&k| {
                let d = (self.angles[k] - t).rem_euclid(TAU);
                d.min(TAU - d) < 1e-9
            })
        };
        for i in 0..m {
            let a = self.angles[i];
            for image in [a + FRAC_PI_2, -a, FRAC_PI_2 - a] {
                if let Some(j) = find(image) {
                    if i < j && !pairs.iter().any(|p: &SymmetryPair| p.i == i && p.j == j) {
                        let se = pooled_se(self.mu_se[i], self.mu_se[j]);
                        let diff = self.mu_hat[i] - self.mu_hat[j];
                        pairs.push(SymmetryPair {
                            i,
                            j,
                            diff,
                            se,
                            within: diff.abs() <= tolerance_se * se,
                        });
                    }
                }
            }
        }
        let max_z = pairs
            .iter()
            .map(|p| if p.se > 0.0 { p.diff.abs() / p.se } else if p.diff == 0.0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max);
        SymmetryCheck {
            tolerance_se,
            pass: pairs.iter().all(|p| p.within),
            max_z,
            pairs,
        }
    }

    /// `μ̂(2r) <= μ̂(r) + tolerance·SE` per direction, for every radius pair
    /// in the grid with an exact factor of two.
    pub fn subadditivity(&self, tolerance_se: f64) -> Vec<SubadditivityCheck> {
        let mut out = Vec::new();
        for (ai, &angle) in self.angles.iter().enumerate() {
            for (j, &r) in self.radii.iter().enumerate() {
                let Some(k) = self.radii.iter().position(|&s| s == 2.0 * r) else { continue };
                let (small, large) = (self.cell(ai, j), self.cell(ai, k));
                let se = pooled_se(small.mu_se, large.mu_se);
                out.push(SubadditivityCheck {
                    angle,
                    radius: r,
                    mu_small: small.mu,
                    mu_large: large.mu,
                    se,
                    pass: large.mu <= small.mu + tolerance_se * se,
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryPair {
    pub i: usize,
    pub j: usize,
    pub diff: f64,
    pub se: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub tolerance_se: f64,
    pub pass: bool,
    /// Largest `|difference| / SE`.
    pub max_z: f64,
    pub pairs: Vec<SymmetryPair>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubadditivityCheck {
    pub angle: f64,
    pub radius: f64,
    pub mu_small: f64,
    pub mu_large: f64,
    pub se: f64,
    pub pass: bool,
}

/// Mean passage time from the origin to the lattice points nearest
/// `r (cos θ, sin θ)`, for every radius and direction. Each trial builds one
/// tree from the origin that stops once all targets are settled.
pub fn estimate_shape(
    settings: &ExperimentSettings,
    radii: &[f64],
    angles: &[f64],
    window_half_width: Option<u32>,
) -> Result<ShapeEstimate> {
    settings.check()?;
    if radii.is_empty() || angles.is_empty() || radii.iter().any(|r| !(*r >= 1.0)) {
        return Err(FppError::Config("shape needs positive radii and at least one direction".into()));
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let hw = window_half_width.unwrap_or_else(|| policy_half_width(r_max));
    if r_max > hw as f64 * 2.0 / 3.0 + 1e-9 {
        return Err(FppError::Config(format!(
            "largest radius {r_max} exceeds two thirds of the window half-width {hw}"
        )));
    }
    let window = Window::new(Vertex::ORIGIN, hw).map_err(|e| FppError::Config(e.to_string()))?;
    let targets: Vec<Vertex> = angles
        .iter()
        .flat_map(|&a| radii.iter().map(move |&r| target(r, a)))
        .collect();

    let run = run_trials(settings.master_seed, settings.trials, settings.threads, |_, seed| {
        let field = settings.field(seed)?;
        let tree = partial_tree(&field, Vertex::ORIGIN, &window, &targets)?;
        Ok(targets.iter().map(|t| tree.dist(*t).expect("target settled")).collect::<Vec<f64>>())
    })?;

    let mut sums = vec![Summary::new(); targets.len()];
    for out in &run.outputs {
        for (s, &t) in sums.iter_mut().zip(out) {
            s.push(t);
        }
    }
    let mut cells = Vec::with_capacity(targets.len());
    for (ai, &angle) in angles.iter().enumerate() {
        for (ri, &radius) in radii.iter().enumerate() {
            let k = ai * radii.len() + ri;
            let len = targets[k].norm();
            let s = &sums[k];
            cells.push(ShapeCell {
                angle,
                radius,
                target: targets[k],
                mean_time: s.mean(),
                se_time: s.std_error(),
                mu: s.mean() / len,
                mu_se: s.std_error() / len,
            });
        }
    }
    let last = radii
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|p| p.0)
        .unwrap();
    let mu_hat = (0..angles.len()).map(|a| cells[a * radii.len() + last].mu).collect();
    let mu_se = (0..angles.len()).map(|a| cells[a * radii.len() + last].mu_se).collect();
    Ok(ShapeEstimate {
        distribution: settings.distribution,
        angles: angles.to_vec(),
        radii: radii.to_vec(),
        cells,
        mu_hat,
        mu_se,
        trials: settings.trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtendedShapeRow {
    pub inner_radius: f64,
    /// Mean over trials of the per-trial violation fraction.
    pub violation_fraction: f64,
    pub se: f64,
    pub pairs_per_trial: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtendedShapeReport {
    pub epsilon: f64,
    pub offsets: Vec<f64>,
    pub rows: Vec<ExtendedShapeRow>,
}

/// For probes `z` at each inner radius and offsets `y`, the fraction of
/// pairs with `|T(z, z+y) - μ̂(y)| > ε max(|z|, |y|)`. Probe directions are
/// the four diagonals for `z` and the four axes for `y`. Each `T(z, ·)`
/// comes from a tree in the window of half-width `ceil(1.5 max|y|)` around `z`.
pub fn extended_shape_check<M>(
    settings: &ExperimentSettings,
    epsilon: f64,
    inner_radii: &[f64],
    offsets: &[f64],
    mu: M,
) -> Result<ExtendedShapeReport>
where
    M: Fn(Vertex) -> f64 + Sync,
{
    settings.check()?;
    if !(epsilon >= 0.0) || inner_radii.is_empty() || offsets.is_empty() {
        return Err(FppError::Config("extended shape needs ε >= 0, inner radii and offsets".into()));
    }
    let hw = policy_half_width(offsets.iter().copied().fold(0.0, f64::max));
    let z_dirs: Vec<f64> = (0..4).map(|k| TAU / 8.0 + k as f64 * FRAC_PI_2).collect();
    let y_dirs: Vec<f64> = (0..4).map(|k| k as f64 * FRAC_PI_2).collect();
    let ys: Vec<Vertex> = offsets
        .iter()
        .flat_map(|&r| y_dirs.iter().map(move |&a| target(r, a)))
        .collect();
    let pairs_per = z_dirs.len() * ys.len();

    let run = run_trials(settings.master_seed, settings.trials, settings.threads, |_, seed| {
        let field = settings.field(seed)?;
        inner_radii
            .iter()
            .map(|&rz| {
                let mut bad = 0usize;
                for &a in &z_dirs {
                    let z = target(rz, a);
                    let window = Window::new(z, hw)?;
                    let goals: Vec<Vertex> = ys.iter().map(|y| Vertex::new(z.x + y.x, z.y + y.y)).collect();
                    let tree = partial_tree(&field, z, &window, &goals)?;
                    for (y, g) in ys.iter().zip(&goals) {
                        let t = tree.dist(*g).expect("target settled");
                        if (t - mu(*y)).abs() > epsilon * z.norm().max(y.norm()) {
                            bad += 1;
                        }
                    }
                }
                Ok(bad as f64 / pairs_per as f64)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let rows = inner_radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let s: Summary = run.outputs.iter().map(|o| o[k]).collect();
            ExtendedShapeRow {
                inner_radius: r,
                violation_fraction: s.mean(),
                se: s.std_error(),
                pairs_per_trial: pairs_per,
            }
        })
        .collect();
    Ok(ExtendedShapeReport {
        epsilon,
        offsets: offsets.to_vec(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MidpointPoint {
    pub k: u32,
    pub trials: usize,
    pub hits: u64,
    pub p_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MidpointCurve {
    pub points: Vec<MidpointPoint>,
    /// Log-log slope of `p̂` against `k`, when every `p̂` is positive.
    pub fit: Option<LineFit>,
    /// `p̂` strictly decreasing with every consecutive gap at least one pooled SE.
    pub separated_decrease: bool,
    /// Smallest `(p̂_k - p̂_{k'}) / pooled SE` over consecutive radii.
    pub min_gap_se: f64,
}

/// `P(0 ∈ Geo(-k e1, k e1))` per radius. Every (radius, trial) pair gets
/// its own seed; the window is centred at the origin with half-width
/// `ceil(1.5 k)`.
pub fn midpoint_probability(settings: &ExperimentSettings, radii: &[u32]) -> Result<MidpointCurve> {
    settings.check()?;
    if radii.is_empty() || radii.iter().any(|&k| k < 2) {
        return Err(FppError::Config("midpoint radii must be at least 2".into()));
    }
    let n = settings.trials;
    let run = run_trials(settings.master_seed, n * radii.len(), settings.threads, |i, seed| {
        let k = radii[i as usize / n] as i32;
        let window = Window::new(Vertex::ORIGIN, policy_half_width(k as f64))?;
        let field = settings.field(seed)?;
        let (x, y) = (Vertex::new(-k, 0), Vertex::new(k, 0));
        let tree = partial_tree(&field, x, &window, &[y])?;
        Ok(tree.path_to(y)?.contains(Vertex::ORIGIN))
    })?;
    let points: Vec<MidpointPoint> = radii
        .iter()
        .enumerate()
        .map(|(ri, &k)| {
            let hits = run.outputs[ri * n..(ri + 1) * n].iter().filter(|h| **h).count() as u64;
            let (lo, hi) = wilson_interval(hits, n as u64, Z95);
            MidpointPoint {
                k,
                trials: n,
                hits,
                p_hat: hits as f64 / n as f64,
                se: proportion_se(hits, n as u64),
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect();
    let ks: Vec<f64> = points.iter().map(|p| p.k as f64).collect();
    let ps: Vec<f64> = points.iter().map(|p| p.p_hat).collect();
    let fit = if points.len() >= 2 { fit_power_law(&ks, &ps).ok() } else { None };
    let gaps: Vec<f64> = points
        .windows(2)
        .map(|w| {
            let se = pooled_se(w[0].se, w[1].se);
            let d = w[0].p_hat - w[1].p_hat;
            if se > 0.0 {
                d / se
            } else if d > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    let min_gap_se = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MidpointCurve {
        separated_decrease: points.len() >= 2 && gaps.iter().all(|g| *g >= 1.0),
        min_gap_se: if gaps.is_empty() { f64::NAN } else { min_gap_se },
        points,
        fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationStats {
    pub separation: u32,
    /// Merge radius per trial, in trial order.
    pub merge_radii: Vec<f64>,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoalescenceStats {
    pub target_radius: u32,
    pub per_separation: Vec<SeparationStats>,
    pub median_nondecreasing: bool,
    /// Every merge radius lies in `[0, R]`.
    pub bounded: bool,
}

/// Merge of the geodesics from `(0, 0)` and `(0, s)` to the target
/// `(R, 0)`, both read off one tree rooted at the target. The merge vertex
/// is their first common vertex; its merge radius is how far it sits from
/// the sources' side, `max(0, R - |target - merge|)`.
pub fn coalescence_study(settings: &ExperimentSettings, separations: &[u32], target_radius: u32) -> Result<CoalescenceStats> {
    settings.check()?;
    if separations.is_empty() || target_radius < 2 {
        return Err(FppError::Config("coalescence needs separations and a target radius of at least 2".into()));
    }
    if let Some(&s) = separations.iter().find(|&&s| s as f64 > target_radius as f64 / 8.0) {
        return Err(FppError::Config(format!(
            "separation {s} exceeds an eighth of the target radius {target_radius}"
        )));
    }
    let r = target_radius as i32;
    let t = Vertex::new(r, 0);
    let window = Window::new(Vertex::ORIGIN, policy_half_width(target_radius as f64))?;
    let n = settings.trials;
    let run = run_trials(settings.master_seed, n * separations.len(), settings.threads, |i, seed| {
        let s = separations[i as usize / n] as i32;
        let field = settings.field(seed)?;
        let (a, b) = (Vertex::ORIGIN, Vertex::new(0, s));
        let tree = partial_tree(&field, t, &window, &[a, b])?;
        let pa = tree.path_to(a)?;
        let pb = tree.path_to(b)?;
        // Paths run target → source; the merge vertex is the last shared one.
        let shared = pa
            .vertices()
            .iter()
            .zip(pb.vertices())
            .take_while(|(u, v)| u == v)
            .count();
        let m = pa.vertices()[shared - 1];
        Ok((r as f64 - m.euclidean(t)).max(0.0))
    })?;
    let per_separation: Vec<SeparationStats> = separations
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            let radii = run.outputs[si * n..(si + 1) * n].to_vec();
            let mut sorted = radii.clone();
            sorted.sort_by(f64::total_cmp);
            SeparationStats {
                separation: s,
                q25: quantile(&sorted, 0.25),
                median: quantile(&sorted, 0.5),
                q75: quantile(&sorted, 0.75),
                max: *sorted.last().unwrap(),
                merge_radii: radii,
            }
        })
        .collect();
    let bounded = per_separation
        .iter()
        .flat_map(|s| &s.merge_radii)
        .all(|m| (0.0..=target_radius as f64).contains(m));
    Ok(CoalescenceStats {
        target_radius,
        median_nondecreasing: per_separation.windows(2).all(|w| w[0].median <= w[1].median),
        bounded,
        per_separation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    /// Variance of `T(0, n e1)`.
    Chi,
    /// Mean of the largest `|y|` along `Geo(0, n e1)`.
    Xi,
    /// Midpoint probability `p̂_k`.
    Midpoint,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::Chi => "chi",
            Observable::Xi => "xi",
            Observable::Midpoint => "midpoint",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub observable: Observable,
    pub sizes: Vec<u32>,
    pub statistic: Vec<f64>,
    pub statistic_se: Vec<f64>,
    pub fit: Option<LineFit>,
    /// Exponent implied by the slope: `slope / 2` for chi, `slope` for xi,
    /// `-slope` for midpoint.
    pub exponent: Option<f64>,
    /// Some statistic was not positive, so no log-log fit exists.
    pub degenerate: bool,
}

/// Passage times and transversal excursions of `Geo(0, n e1)` for each size.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSamples {
    pub sizes: Vec<u32>,
    /// Per size, per trial: `(T(0, n e1), max |y| along the geodesic)`.
    pub samples: Vec<Vec<(f64, f64)>>,
}

/// Samples `Geo(0, n e1)` for every size, in a window of half-width
/// `ceil(1.5 n)` around the origin; every (size, trial) pair gets its own seed.
pub fn scaling_samples(settings: &ExperimentSettings, sizes: &[u32]) -> Result<ScalingSamples> {
    settings.check()?;
    if sizes.len() < 3 {
        return Err(FppError::Degenerate(format!("exponent fits need at least 3 sizes, got {}", sizes.len())));
    }
    if sizes.iter().any(|&s| s < 2) {
        return Err(FppError::Config("sizes must be at least 2".into()));
    }
    let n = settings.trials;
    let run = run_trials(settings.master_seed, n * sizes.len(), settings.threads, |i, seed| {
        let size = sizes[i as usize / n] as i32;
        let window = Window::new(Vertex::ORIGIN, policy_half_width(size as f64))?;
        let field = settings.field(seed)?;
        let y = Vertex::new(size, 0);
        let tree = partial_tree(&field, Vertex::ORIGIN, &window, &[y])?;
        let path = tree.path_to(y)?;
        let wander = path.vertices().iter().map(|v| v.y.unsigned_abs()).max().unwrap_or(0);
        Ok((tree.dist(y).expect("target settled"), wander as f64))
    })?;
    Ok(ScalingSamples {
        sizes: sizes.to_vec(),
        samples: run.outputs.chunks(n).map(|c| c.to_vec()).collect(),
    })
}

impl ScalingSamples {
    pub fn fit(&self, observable: Observable) -> Result<ExponentFit> {
        let (stat, se): (Vec<f64>, Vec<f64>) = self
            .samples
            .iter()
            .map(|trials| match observable {
                Observable::Chi => {
                    let s: Summary = trials.iter().map(|t| t.0).collect();
                    let n = s.count() as f64;
                    (s.variance(), s.variance() * (2.0 / (n - 1.0).max(1.0)).sqrt())
                }
                Observable::Xi => {
                    let s: Summary = trials.iter().map(|t| t.1).collect();
                    (s.mean(), s.std_error())
                }
                Observable::Midpoint => (f64::NAN, f64::NAN),
            })
            .unzip();
        if observable == Observable::Midpoint {
            return Err(FppError::Config("midpoint exponents come from a midpoint curve".into()));
        }
        Ok(exponent_from(observable, &self.sizes, stat, se))
    }
}

fn exponent_from(observable: Observable, sizes: &[u32], statistic: Vec<f64>, statistic_se: Vec<f64>) -> ExponentFit {
    let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let degenerate = statistic.iter().any(|s| !(*s > 0.0));
    let fit = if degenerate { None } else { fit_power_law(&xs, &statistic).ok() };
    let exponent = fit.as_ref().map(|f| match observable {
        Observable::Chi => f.slope / 2.0,
        Observable::Xi => f.slope,
        Observable::Midpoint => -f.slope,
    });
    ExponentFit {
        observable,
        sizes: sizes.to_vec(),
        statistic,
        statistic_se,
        fit,
        exponent,
        degenerate,
    }
}

/// Log-log fit of a midpoint curve.
pub fn midpoint_exponent(curve: &MidpointCurve) -> Result<ExponentFit> {
    if curve.points.len() < 3 {
        return Err(FppError::Degenerate(format!(
            "exponent fits need at least 3 sizes, got {}",
            curve.points.len()
        )));
    }
    Ok(exponent_from(
        Observable::Midpoint,
        &curve.points.iter().map(|p| p.k).collect::<Vec<_>>(),
        curve.points.iter().map(|p| p.p_hat).collect(),
        curve.points.iter().map(|p| p.se).collect(),
    ))
}

/// Exponent fit for one observable; chi and xi share their samples.
pub fn exponent_fit(settings: &ExperimentSettings, observable: Observable, sizes: &[u32]) -> Result<ExponentFit> {
    match observable {
        Observable::Midpoint => {
            if sizes.len() < 3 {
                return Err(FppError::Degenerate(format!("exponent fits need at least 3 sizes, got {}", sizes.len())));
            }
            midpoint_exponent(&midpoint_probability(settings, sizes)?)
        }
        o => scaling_samples(settings, sizes)?.fit(o),
    }
}
