//! Finite-horizon Busemann differences, linear functional fits and
//! direction diagnostics.
//!
//! An infinite geodesic is replaced by a finite anchor sequence `v_1..v_K`
//! at growing radii, and `B(x, y)` by `b_k = T(x, v_k) - T(y, v_k)`. All
//! passage times to one anchor come from a single tree rooted at that
//! anchor, so additivity of `b_k` is exact, and because weights sit on a
//! dyadic grid the sums involved are exact too.

use std::f64::consts::{FRAC_PI_8, PI, TAU};

use serde::Serialize;

use crate::error::{FppError, Result};
use crate::experiments::ShapeEstimate;
use crate::lattice::{policy_half_width, Vertex, Window};
use crate::metric::{geodesic, partial_tree, shortest_path_tree, GeodesicTree};
use crate::stats::Z95;
use crate::weights::EdgeWeights;

/// Default first-anchor base radius and number of anchors.
pub const DEFAULT_R0: f64 = 16.0;
pub const DEFAULT_ANCHORS: usize = 4;

/// Finite stand-in for an infinite geodesic from `root` in direction `theta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RayApproximation {
    root: Vertex,
    theta: f64,
    radii: Vec<f64>,
    anchors: Vec<Vertex>,
    windows: Vec<Window>,
    on_geodesic: bool,
}

/// Radii `r0 * 2^k` for `k = 1..=count`.
pub fn geometric_radii(r0: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| r0 * f64::powi(2.0, k as i32)).collect()
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(FppError::Domain("a ray needs at least one anchor".into()));
    }
    if radii.iter().any(|r| !(*r >= 1.0) || !r.is_finite()) || radii.windows(2).any(|p| p[0] >= p[1]) {
        return Err(FppError::Domain(format!("anchor radii must be increasing and at least 1, got {radii:?}")));
    }
    Ok(())
}

fn point_at(root: Vertex, theta: f64, r: f64) -> Vertex {
    Vertex::nearest(root.x as f64 + r * theta.cos(), root.y as f64 + r * theta.sin())
}

impl RayApproximation {
    /// Anchors at the lattice points nearest `root + r_k (cos θ, sin θ)`,
    /// each with its own window of half-width `ceil(1.5 r_k)` around the root.
    pub fn new(root: Vertex, theta: f64, radii: &[f64]) -> Result<Self> {
        check_radii(radii)?;
        let windows = radii
            .iter()
            .map(|&r| Window::new(root, policy_half_width(r)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            root,
            theta,
            radii: radii.to_vec(),
            anchors: radii.iter().map(|&r| point_at(root, theta, r)).collect(),
            windows,
            on_geodesic: false,
        })
    }

    /// Like [`RayApproximation::new`] but with one window for every anchor.
    pub fn with_window(root: Vertex, theta: f64, radii: &[f64], window: Window) -> Result<Self> {
        check_radii(radii)?;
        let anchors: Vec<Vertex> = radii.iter().map(|&r| point_at(root, theta, r)).collect();
        let ray = Self {
            root,
            theta,
            radii: radii.to_vec(),
            anchors,
            windows: vec![window; radii.len()],
            on_geodesic: false,
        };
        ray.check_windows()?;
        Ok(ray)
    }

    /// Anchors taken along the computed geodesic from `root` to the
    /// farthest target point: `v_k` is the first geodesic vertex at
    /// Euclidean distance at least `r_k` from the root (the last anchor is
    /// the target itself). One window of half-width `ceil(1.5 r_K)` serves
    /// all anchors, so the monotone witnesses are meaningful.
    pub fn along_geodesic<W: EdgeWeights>(weights: &W, root: Vertex, theta: f64, radii: &[f64]) -> Result<Self> {
        check_radii(radii)?;
        let r_max = *radii.last().unwrap();
        let window = Window::new(root, policy_half_width(r_max))?;
        let target = point_at(root, theta, r_max);
        let seg = geodesic(weights, root, target, &window)?;
        let path = seg.path.vertices();
        let mut anchors = Vec::with_capacity(radii.len());
        for (k, &r) in radii.iter().enumerate() {
            let v = if k + 1 == radii.len() {
                target
            } else {
                *path
                    .iter()
                    .find(|v| v.euclidean(root) >= r)
                    .ok_or_else(|| FppError::Internal("geodesic ends before the anchor radius".into()))?
            };
            anchors.push(v);
        }
        for p in anchors.windows(2) {
            if p[0] == p[1] {
                return Err(FppError::Degenerate(format!("anchors coincide at {}", p[0])));
            }
        }
        let ray = Self {
            root,
            theta,
            radii: radii.to_vec(),
            anchors,
            windows: vec![window; radii.len()],
            on_geodesic: true,
        };
        ray.check_windows()?;
        Ok(ray)
    }

    fn check_windows(&self) -> Result<()> {
        let hw = self.windows.iter().map(|w| w.half_width()).max().unwrap_or(0) as f64;
        let r_max = *self.radii.last().unwrap();
        if r_max > hw * 2.0 / 3.0 + 1e-9 {
            return Err(FppError::Bounds(format!(
                "horizon {r_max} exceeds two thirds of window half-width {hw}"
            )));
        }
        for (a, w) in self.anchors.iter().zip(&self.windows) {
            if !w.contains(*a) || !w.contains(self.root) {
                return Err(FppError::Bounds(format!("anchor {a} outside its window")));
            }
        }
        Ok(())
    }

    pub fn root(&self) -> Vertex {
        self.root
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn anchors(&self) -> &[Vertex] {
        &self.anchors
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn horizon(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// Whether all anchors lie, in order, on one computed geodesic from the root.
    pub fn on_geodesic(&self) -> bool {
        self.on_geodesic
    }
}

/// One geodesic tree per anchor, giving `T(·, v_k)` for every vertex.
#[derive(Clone, Debug)]
pub struct AnchorTrees {
    ray: RayApproximation,
    trees: Vec<GeodesicTree>,
}

impl AnchorTrees {
    pub fn build<W: EdgeWeights>(weights: &W, ray: &RayApproximation) -> Result<Self> {
        let trees = ray
            .anchors
            .iter()
            .zip(&ray.windows)
            .map(|(a, w)| shortest_path_tree(weights, *a, w))
            .collect::<Result<_>>()?;
        Ok(Self { ray: ray.clone(), trees })
    }

    pub fn ray(&self) -> &RayApproximation {
        &self.ray
    }

    pub fn trees(&self) -> &[GeodesicTree] {
        &self.trees
    }

    /// `T(z, v_k)` for every anchor.
    pub fn times(&self, z: Vertex) -> Result<Vec<f64>> {
        self.trees
            .iter()
            .map(|t| {
                t.dist(z)
                    .ok_or_else(|| FppError::Bounds(format!("{z} outside the window of anchor {}", t.source())))
            })
            .collect()
    }

    /// `b_k = T(x, v_k) - T(y, v_k)` for every anchor.
    pub fn differences(&self, x: Vertex, y: Vertex) -> Result<Vec<f64>> {
        let tx = self.times(x)?;
        let ty = self.times(y)?;
        Ok(tx.iter().zip(&ty).map(|(a, b)| a - b).collect())
    }

    /// `T(z, v_k) - T(v_0, v_k)` with `v_0` the root.
    pub fn witness(&self, z: Vertex) -> Result<Vec<f64>> {
        self.differences(z, self.ray.root)
    }

    /// Full estimate for `(x, y)`, computing `T_k(x, y)` in each distinct anchor window.
    pub fn estimate<W: EdgeWeights>(&self, weights: &W, x: Vertex, y: Vertex) -> Result<BusemannEstimate> {
        let values = self.differences(x, y)?;
        let mut bound = Vec::with_capacity(values.len());
        let mut cached: Option<(Window, f64)> = None;
        for w in &self.ray.windows {
            let t = match cached {
                Some((cw, t)) if cw == *w => t,
                _ => {
                    let tree = partial_tree(weights, x, w, &[y])?;
                    let t = tree.dist(y).expect("target settled");
                    cached = Some((*w, t));
                    t
                }
            };
            bound.push(t);
        }
        let (witness_x, witness_y) = if self.ray.on_geodesic {
            (Some(self.witness(x)?), Some(self.witness(y)?))
        } else {
            (None, None)
        };
        Ok(BusemannEstimate {
            x,
            y,
            ray: self.ray.clone(),
            values,
            bound,
            witness_x,
            witness_y,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BusemannEstimate {
    pub x: Vertex,
    pub y: Vertex,
    pub ray: RayApproximation,
    /// `b_k`, one per anchor.
    pub values: Vec<f64>,
    /// `T(x, y)` in the window of each anchor.
    pub bound: Vec<f64>,
    /// `T(x, v_k) - T(v_0, v_k)`, present for geodesic-anchored rays.
    pub witness_x: Option<Vec<f64>>,
    pub witness_y: Option<Vec<f64>>,
}

impl BusemannEstimate {
    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `|b_k - b_{k-1}|`, with 0 for the first anchor.
    pub fn gaps(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.values.windows(2).map(|p| (p[1] - p[0]).abs()))
            .collect()
    }

    /// Convergence proxy `|b_K - b_{K-1}|`.
    pub fn last_gap(&self) -> f64 {
        *self.gaps().last().unwrap()
    }

    /// Largest `|b_k| - T_k(x, y)`.
    pub fn bound_excess(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.bound)
            .map(|(b, t)| b.abs() - t)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether both witnesses are nonincreasing in k to within one ulp;
    /// `None` when the anchors are not on a common geodesic.
    pub fn witnesses_monotone(&self) -> Option<bool> {
        Some(nonincreasing_to_ulp(self.witness_x.as_ref()?) && nonincreasing_to_ulp(self.witness_y.as_ref()?))
    }
}

/// `s[k+1] <= s[k]` up to one unit in the last place of `s[k]`.
pub fn nonincreasing_to_ulp(s: &[f64]) -> bool {
    s.windows(2).all(|p| p[1] <= p[0] + ulp(p[0]))
}

fn ulp(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(x.to_bits() + 1) - x
    }
}

/// `b_k(x, y)` along `ray`, building its anchor trees.
pub fn busemann_sequence<W: EdgeWeights>(weights: &W, x: Vertex, y: Vertex, ray: &RayApproximation) -> Result<BusemannEstimate> {
    for (a, w) in ray.anchors.iter().zip(&ray.windows) {
        if !w.contains(x) || !w.contains(y) {
            return Err(FppError::Bounds(format!("{x} or {y} lies outside the window of anchor {a}")));
        }
    }
    AnchorTrees::build(weights, ray)?.estimate(weights, x, y)
}

/// Least-squares linear functional `ρ(z) = a z_x + b z_y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearFunctionalFit {
    pub a: f64,
    pub b: f64,
    /// `B(0, z) - ρ(z)` per sample.
    pub residuals: Vec<f64>,
    /// `max |B(0, z) - ρ(z)| / |z|` over nonzero samples.
    pub residual: f64,
}

impl LinearFunctionalFit {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y
    }

    /// `ρ` on the unit vector at angle `theta`.
    pub fn at_angle(&self, theta: f64) -> f64 {
        self.eval(theta.cos(), theta.sin())
    }
}

/// Fits `ρ` through the origin to samples `(z, B(0, z))`.
pub fn fit_linear_functional(samples: &[(Vertex, f64)]) -> Result<LinearFunctionalFit> {
    let (mut sxx, mut sxy, mut syy, mut sxb, mut syb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(z, v) in samples {
        let (x, y) = (z.x as f64, z.y as f64);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxb += x * v;
        syb += y * v;
    }
    let det = sxx * syy - sxy * sxy;
    if samples.len() < 3 || det <= 1e-12 * sxx * syy || det == 0.0 {
        return Err(FppError::Degenerate(format!(
            "need at least 3 non-collinear samples, got {}",
            samples.len()
        )));
    }
    let a = (sxb * syy - syb * sxy) / det;
    let b = (syb * sxx - sxb * sxy) / det;
    let residuals: Vec<f64> = samples
        .iter()
        .map(|&(z, v)| v - (a * z.x as f64 + b * z.y as f64))
        .collect();
    let residual = samples
        .iter()
        .zip(&residuals)
        .filter(|((z, _), _)| *z != Vertex::ORIGIN)
        .map(|((z, _), r)| r.abs() / z.norm())
        .fold(0.0, f64::max);
    Ok(LinearFunctionalFit { a, b, residuals, residual })
}

/// Probe offsets: rings of the given radii, each at angles
/// `theta ± π/8` and `theta ± 3π/8`.
pub fn probe_offsets(theta: f64, ring_radii: &[f64]) -> Vec<Vertex> {
    let mut out = Vec::with_capacity(ring_radii.len() * 4);
    for &r in ring_radii {
        for d in [-3.0, -1.0, 1.0, 3.0] {
            out.push(point_at(Vertex::ORIGIN, theta + d * FRAC_PI_8, r));
        }
    }
    out
}

/// Default rings: an eighth, a quarter and a half of the first anchor radius.
pub fn default_rings(first_radius: f64) -> Vec<f64> {
    vec![first_radius / 8.0, first_radius / 4.0, first_radius / 2.0]
}

/// Fits `ρ` at every horizon from `b_k(root, root + z)` over the probes.
pub fn fit_per_horizon(anchors: &AnchorTrees, probes: &[Vertex]) -> Result<Vec<LinearFunctionalFit>> {
    let root = anchors.ray().root();
    let diffs: Vec<Vec<f64>> = probes
        .iter()
        .map(|z| anchors.differences(root, Vertex::new(root.x + z.x, root.y + z.y)))
        .collect::<Result<_>>()?;
    (0..anchors.ray().anchors().len())
        .map(|k| {
            let samples: Vec<(Vertex, f64)> = probes.iter().zip(&diffs).map(|(z, d)| (*z, d[k])).collect();
            fit_linear_functional(&samples)
        })
        .collect()
}

/// Range of directions visited by the far tail of a tree path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectionEstimate {
    pub theta_min: f64,
    pub theta_max: f64,
}

impl DirectionEstimate {
    pub fn width(&self) -> f64 {
        self.theta_max - self.theta_min
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.theta_min + self.theta_max)
    }
}

/// Angles of `(v - root) / |v - root|` over the last `fraction` of the
/// vertices on the tree path to `leaf`, unwrapped around the leaf's angle.
pub fn direction_estimate(tree: &GeodesicTree, leaf: Vertex, fraction: f64) -> Result<DirectionEstimate> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(FppError::Domain(format!("tail fraction must lie in (0, 1], got {fraction}")));
    }
    let path = tree.path_to(leaf)?;
    if path.len() < 10 {
        return Err(FppError::Degenerate(format!("path to {leaf} has {} edges, need 10", path.len())));
    }
    let root = tree.source();
    let angle = |v: Vertex| ((v.y - root.y) as f64).atan2((v.x - root.x) as f64);
    let centre = angle(leaf);
    let vs = &path.vertices()[1..];
    let take = ((fraction * vs.len() as f64).ceil() as usize).clamp(1, vs.len());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &vs[vs.len() - take..] {
        let mut d = (angle(v) - centre).rem_euclid(TAU);
        if d > PI {
            d -= TAU;
        }
        lo = lo.min(centre + d);
        hi = hi.max(centre + d);
    }
    Ok(DirectionEstimate {
        theta_min: lo,
        theta_max: hi,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArcReport {
    /// `max ρ(u) - μ̂(u)` over the grid.
    pub max_excess: f64,
    /// Grid directions where `ρ` exceeds `μ̂` by more than the tolerance.
    pub violations: Vec<f64>,
    /// Grid directions where `μ̂ - ρ` is within tolerance of its minimum.
    pub arc: Vec<f64>,
    /// Whether the middle of the direction interval is nearest to an arc direction.
    pub direction_in_arc: bool,
}

/// Compares `ρ` with the shape estimate on its direction grid.
///
/// The tolerance at each direction is `ci_multiple` normal 95% half-widths
/// of `μ̂` there.
pub fn arc_check(fit: &LinearFunctionalFit, shape: &ShapeEstimate, dir: &DirectionEstimate, ci_multiple: f64) -> ArcReport {
    let rows: Vec<(f64, f64, f64)> = shape
        .angles
        .iter()
        .zip(shape.mu_hat.iter().zip(&shape.mu_se))
        .map(|(&a, (&mu, &se))| (a, mu - fit.at_angle(a), ci_multiple * Z95 * se))
        .collect();
    let max_excess = rows.iter().map(|r| -r.1).fold(f64::NEG_INFINITY, f64::max);
    let violations = rows.iter().filter(|r| -r.1 > r.2).map(|r| r.0).collect();
    let min_gap = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let arc: Vec<f64> = rows.iter().filter(|r| r.1 <= min_gap + r.2).map(|r| r.0).collect();
    let circ = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    };
    let nearest = rows
        .iter()
        .map(|r| r.0)
        .min_by(|a, b| circ(*a, dir.mid()).total_cmp(&circ(*b, dir.mid())));
    let direction_in_arc = nearest.is_some_and(|n| arc.contains(&n));
    ArcReport {
        max_excess,
        violations,
        arc,
        direction_in_arc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{EdgeWeightField, WeightDistribution};

    fn v(x: i32, y: i32) -> Vertex {
        Vertex::new(x, y)
    }

    fn exp_field(seed: u64) -> EdgeWeightField {
        EdgeWeightField::new(seed, WeightDistribution::Exponential { rate: 1.0 }).unwrap()
    }

    #[test]
    fn identical_points_give_zero() {
        let f = exp_field(3);
        let ray = RayApproximation::new(v(0, 0), 0.3, &geometric_radii(4.0, 3)).unwrap();
        let est = busemann_sequence(&f, v(2, 1), v(2, 1), &ray).unwrap();
        assert!(est.values.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn bound_and_additivity() {
        let f = exp_field(8);
        let ray = RayApproximation::new(v(0, 0), 1.0, &geometric_radii(4.0, 3)).unwrap();
        let trees = AnchorTrees::build(&f, &ray).unwrap();
        let (x, y, z) = (v(1, 2), v(-3, 0), v(2, -2));
        let e = trees.estimate(&f, x, y).unwrap();
        assert!(e.bound_excess() <= 1e-9);
        let xz = trees.differences(x, z).unwrap();
        let xy = trees.differences(x, y).unwrap();
        let yz = trees.differences(y, z).unwrap();
        for k in 0..xz.len() {
            assert_eq!(xz[k] - xy[k] - yz[k], 0.0);
        }
    }

    #[test]
    fn point_on_geodesic_gives_negative_passage_time() {
        let f = exp_field(21);
        let radii = geometric_radii(4.0, 3);
        let w = Window::new(v(0, 0), policy_half_width(32.0)).unwrap();
        let ray = RayApproximation::with_window(v(0, 0), 0.0, &radii, w).unwrap();
        let y = v(-2, 1);
        let tree = shortest_path_tree(&f, y, &w).unwrap();
        let path = tree.path_to(ray.anchors()[2]).unwrap();
        let x = path.vertices()[path.len() / 2];
        let est = busemann_sequence(&f, x, y, &ray).unwrap();
        assert_eq!(est.final_value(), -tree.dist(x).unwrap());
    }

    #[test]
    fn geodesic_ray_witnesses_are_monotone() {
        let f = exp_field(2);
        let ray = RayApproximation::along_geodesic(&f, v(0, 0), 0.7, &geometric_radii(4.0, 3)).unwrap();
        assert!(ray.on_geodesic());
        let est = busemann_sequence(&f, v(3, -1), v(-2, 2), &ray).unwrap();
        assert_eq!(est.witnesses_monotone(), Some(true));
    }

    #[test]
    fn exact_linear_input_is_recovered() {
        let samples: Vec<(Vertex, f64)> = [v(1, 0), v(0, 1), v(3, 4), v(-2, 5)]
            .iter()
            .map(|z| (*z, 2.0 * z.x as f64 + z.y as f64))
            .collect();
        let fit = fit_linear_functional(&samples).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-12 && (fit.b - 1.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn collinear_samples_are_degenerate() {
        let samples = [(v(1, 1), 1.0), (v(2, 2), 2.0), (v(-3, -3), 0.5)];
        assert!(matches!(fit_linear_functional(&samples), Err(FppError::Degenerate(_))));
    }

    #[test]
    fn unit_weights_busemann_toward_east() {
        // With T = ℓ1 and a far-east anchor v, T(0,v) - T(z,v) = z_x - |z_y|.
        let f = EdgeWeightField::new(0, WeightDistribution::ConstantOne).unwrap();
        let ray = RayApproximation::new(v(0, 0), 0.0, &[40.0]).unwrap();
        let trees = AnchorTrees::build(&f, &ray).unwrap();
        let mut samples = Vec::new();
        for z in [v(1, 0), v(3, 0), v(2, 1), v(4, 3), v(-2, 2), v(5, 5), v(0, 4)] {
            let b = trees.differences(v(0, 0), z).unwrap()[0];
            assert_eq!(b, (z.x - z.y.abs()) as f64);
            samples.push((z, b));
        }
        let fit = fit_linear_functional(&samples).unwrap();
        assert!((fit.a - 1.0).abs() < 1e-12 && (fit.b + 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_weight_direction_pins_axis() {
        let f = EdgeWeightField::new(0, WeightDistribution::ConstantOne).unwrap();
        let mut widths = Vec::new();
        for n in [16, 64] {
            let w = Window::new(v(0, 0), n as u32 + 2).unwrap();
            let tree = shortest_path_tree(&f, v(0, 0), &w).unwrap();
            let d = direction_estimate(&tree, v(n, 0), 0.5).unwrap();
            assert!(d.theta_min <= 0.0 && 0.0 <= d.theta_max);
            widths.push(d.width());
        }
        assert!(widths[1] <= widths[0]);
    }

    #[test]
    fn short_paths_are_rejected() {
        let f = exp_field(1);
        let w = Window::new(v(0, 0), 5).unwrap();
        let tree = shortest_path_tree(&f, v(0, 0), &w).unwrap();
        assert!(matches!(direction_estimate(&tree, v(2, 1), 1.0), Err(FppError::Degenerate(_))));
    }

    #[test]
    fn full_fraction_sweeps_whole_path() {
        let f = exp_field(6);
        let w = Window::new(v(0, 0), 20).unwrap();
        let tree = shortest_path_tree(&f, v(0, 0), &w).unwrap();
        let full = direction_estimate(&tree, v(15, 9), 1.0).unwrap();
        let tail = direction_estimate(&tree, v(15, 9), 0.2).unwrap();
        assert!(full.theta_min <= tail.theta_min && tail.theta_max <= full.theta_max);
    }

    fn toy_shape(mu: Vec<f64>, se: f64) -> ShapeEstimate {
        let m = mu.len();
        ShapeEstimate {
            distribution: WeightDistribution::ConstantOne,
            angles: (0..m).map(|i| i as f64 * TAU / m as f64).collect(),
            radii: vec![1.0],
            cells: Vec::new(),
            mu_se: vec![se; m],
            mu_hat: mu,
            trials: 1,
        }
    }

    #[test]
    fn arc_of_tangent_functional_is_single_direction() {
        let fit = LinearFunctionalFit { a: 1.0, b: 0.0, residuals: vec![], residual: 0.0 };
        // Euclidean unit circle: ρ = x touches it only at angle 0.
        let shape = toy_shape(vec![1.0; 8], 0.0);
        let dir = DirectionEstimate { theta_min: -0.05, theta_max: 0.05 };
        let rep = arc_check(&fit, &shape, &dir, 2.0);
        assert_eq!(rep.arc, vec![0.0]);
        assert!(rep.violations.is_empty());
        assert!(rep.direction_in_arc);
        assert_eq!(rep.max_excess, 0.0);
    }

    #[test]
    fn raised_functional_is_flagged() {
        let se = 0.01;
        let ci = Z95 * se;
        let fit = LinearFunctionalFit { a: 1.0 + 3.0 * ci, b: 0.0, residuals: vec![], residual: 0.0 };
        let shape = toy_shape(vec![1.0; 8], se);
        let dir = DirectionEstimate { theta_min: 0.0, theta_max: 0.0 };
        let rep = arc_check(&fit, &shape, &dir, 2.0);
        assert_eq!(rep.violations, vec![0.0]);
    }
}
