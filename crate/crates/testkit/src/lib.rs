//! Slow, independent reference implementations used as test oracles.

use std::cmp::Ordering;

use fpp_core::lattice::{neighbors, Edge, LatticePath, Vertex, Window};
use fpp_core::weights::{EdgeWeights, VertexNoise};

/// Bellman–Ford distances and parents inside `window`.
///
/// Parents are picked afterwards: among the tight in-window neighbours of a
/// vertex, the one joined by the smallest edge id.
pub fn bellman_ford<W: EdgeWeights>(weights: &W, source: Vertex, window: &Window) -> (Vec<f64>, Vec<Option<Vertex>>) {
    let n = window.len();
    let verts: Vec<Vertex> = window.vertices().collect();
    let mut edges = Vec::new();
    for &a in &verts {
        for b in neighbors(a) {
            if window.contains(b) {
                let e = Edge::new(a, b).unwrap();
                let w = weights.weight(&e);
                if w.is_finite() {
                    edges.push((window.index(a).unwrap(), window.index(b).unwrap(), w, e.id().unwrap().0));
                }
            }
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[window.index(source).unwrap()] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for &(a, b, w, _) in &edges {
            if dist[a] + w < dist[b] {
                dist[b] = dist[a] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut parent = vec![None; n];
    for &(a, b, w, id) in &edges {
        if b != window.index(source).unwrap() && dist[a].is_finite() && dist[a] + w == dist[b] {
            let better = match parent[b] {
                None => true,
                Some((_, best)) => id < best,
            };
            if better {
                parent[b] = Some((a, id));
            }
        }
    }
    (dist, parent.into_iter().map(|p| p.map(|(a, _)| verts[a])).collect())
}

/// Result of enumerating self-avoiding paths.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub best_weight: f64,
    pub best_path: Vec<Vertex>,
    /// Number of paths attaining `best_weight`.
    pub minimizers: usize,
    pub explored: u64,
}

/// Every self-avoiding path from `x` to `y` in `window` with at most
/// `max_len` edges, keeping the lightest ones. Branches heavier than the
/// best full path so far are cut; ties are still followed.
pub fn enumerate_paths<W: EdgeWeights>(weights: &W, x: Vertex, y: Vertex, window: &Window, max_len: usize) -> Enumeration {
    struct Search<'a, W> {
        weights: &'a W,
        window: &'a Window,
        target: Vertex,
        max_len: usize,
        on_path: Vec<bool>,
        path: Vec<Vertex>,
        out: Enumeration,
    }
    impl<W: EdgeWeights> Search<'_, W> {
        fn go(&mut self, acc: f64) {
            self.out.explored += 1;
            let here = *self.path.last().unwrap();
            if here == self.target {
                match acc.partial_cmp(&self.out.best_weight).unwrap() {
                    Ordering::Less => {
                        self.out.best_weight = acc;
                        self.out.best_path = self.path.clone();
                        self.out.minimizers = 1;
                    }
                    Ordering::Equal => self.out.minimizers += 1,
                    Ordering::Greater => {}
                }
                return;
            }
            if self.path.len() > self.max_len {
                return;
            }
            for nb in neighbors(here) {
                let Some(i) = self.window.index(nb) else { continue };
                if self.on_path[i] {
                    continue;
                }
                let w = self.weights.weight(&Edge::new(here, nb).unwrap());
                if !w.is_finite() {
                    continue;
                }
                let next = acc + w;
                if !(next <= self.out.best_weight) {
                    continue;
                }
                self.on_path[i] = true;
                self.path.push(nb);
                self.go(next);
                self.path.pop();
                self.on_path[i] = false;
            }
        }
    }
    let mut s = Search {
        weights,
        window,
        target: y,
        max_len,
        on_path: vec![false; window.len()],
        path: vec![x],
        out: Enumeration {
            best_weight: f64::INFINITY,
            best_path: Vec::new(),
            minimizers: 0,
            explored: 0,
        },
    };
    s.on_path[window.index(x).unwrap()] = true;
    s.go(0.0);
    s.out
}

/// Distance of a path from its root to its end along the boundary cycle,
/// counted counterclockwise from `reference_leaf`.
fn sweep_key(window: &Window, reference_leaf: Vertex, leaf: Vertex) -> usize {
    let per = window.perimeter();
    (window.boundary_position(leaf).unwrap() + per - window.boundary_position(reference_leaf).unwrap()) % per
}

/// Leaves sorted by a counterclockwise sweep of the window boundary starting
/// at `reference_leaf`. For paths of one planar tree that meet the boundary
/// only at their ends this is the planar ccw order.
pub fn boundary_sweep(window: &Window, reference_leaf: Vertex, leaves: &[Vertex]) -> Vec<Vertex> {
    let mut out = leaves.to_vec();
    out.sort_by_key(|&l| sweep_key(window, reference_leaf, l));
    out
}

/// Planar ccw comparison of two paths from one root, computed from turning
/// angles with `atan2`.
///
/// Each path gets a sweep parameter from where and on which side it leaves
/// the reference; paths with equal parameters are split by the ccw turn at
/// the vertex where they diverge from each other.
pub fn winding_compare(p: &LatticePath, q: &LatticePath, reference: &LatticePath) -> Ordering {
    sweep_parameter(p, reference)
        .partial_cmp(&sweep_parameter(q, reference))
        .unwrap()
        .then_with(|| {
            // Same departure point and side: compare at their own divergence.
            let (pv, qv) = (p.vertices(), q.vertices());
            let mut k = 0;
            while k + 1 < pv.len() && k + 1 < qv.len() && pv[k + 1] == qv[k + 1] {
                k += 1;
            }
            if k + 1 >= pv.len() || k + 1 >= qv.len() {
                return Ordering::Equal;
            }
            let rv = reference.vertices();
            let on_ref = k < rv.len() && rv[..=k] == pv[..=k];
            let base = if on_ref && k + 1 < rv.len() {
                angle(pv[k], rv[k + 1])
            } else if k == 0 {
                angle(pv[0], rv.get(1).copied().unwrap_or(pv[0]))
            } else {
                angle(pv[k], pv[k - 1])
            };
            let a = turn(base, angle(pv[k], pv[k + 1]));
            let b = turn(base, angle(qv[k], qv[k + 1]));
            a.partial_cmp(&b).unwrap()
        })
}

fn angle(from: Vertex, to: Vertex) -> f64 {
    ((to.y - from.y) as f64).atan2((to.x - from.x) as f64)
}

/// Counterclockwise turn from `base` to `a` in `[0, 2π)`.
fn turn(base: f64, a: f64) -> f64 {
    let t = (a - base).rem_euclid(std::f64::consts::TAU);
    if t > std::f64::consts::TAU - 1e-9 {
        0.0
    } else {
        t
    }
}

/// Position of a path in the ccw sweep from the reference: 0 if it never
/// leaves the reference, in `(0, 1)` if it leaves to the left (the later the
/// departure the closer to 0), in `(1, 2)` if it leaves to the right (the
/// later the closer to 2), and 1 for branches at the root.
fn sweep_parameter(p: &LatticePath, reference: &LatticePath) -> f64 {
    let (pv, rv) = (p.vertices(), reference.vertices());
    let mut m = 0;
    while m + 1 < pv.len() && m + 1 < rv.len() && pv[m + 1] == rv[m + 1] {
        m += 1;
    }
    if m + 1 >= pv.len() || m + 1 >= rv.len() {
        return 0.0;
    }
    let depth = (m as f64 + 1.0) / (rv.len() as f64 + 1.0);
    if m == 0 {
        return 1.0;
    }
    let ref_out = angle(pv[m], rv[m + 1]);
    let back = turn(ref_out, angle(pv[m], pv[m - 1]));
    let out = turn(ref_out, angle(pv[m], pv[m + 1]));
    if out < back {
        1.0 - depth
    } else {
        1.0 + depth
    }
}

/// Voronoi assignment by scanning every site for every vertex.
pub fn brute_voronoi(noise: &VertexNoise, threshold: f64, window: &Window) -> Option<Vec<Vertex>> {
    let sites: Vec<(Vertex, f64)> = window
        .vertices()
        .map(|v| (v, noise.value(v)))
        .filter(|(_, xi)| *xi <= threshold)
        .collect();
    if sites.is_empty() {
        return None;
    }
    Some(
        window
            .vertices()
            .map(|v| {
                sites
                    .iter()
                    .min_by(|a, b| {
                        a.0.l1(v)
                            .cmp(&b.0.l1(v))
                            .then(a.1.partial_cmp(&b.1).unwrap())
                            .then((a.0.y, a.0.x).cmp(&(b.0.y, b.0.x)))
                    })
                    .unwrap()
                    .0
            })
            .collect(),
    )
}
