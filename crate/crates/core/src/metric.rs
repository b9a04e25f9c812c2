//! The first-passage metric on a finite window.
//!
//! Passage times come from label-setting Dijkstra over the window's induced
//! subgraph. Ties between equal tentative distances (possible only for
//! degenerate fields) go to the predecessor whose connecting edge has the
//! smaller [`EdgeId`], so the tree is a deterministic function of the field.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{FppError, Result};
use crate::lattice::{edge_id_unchecked, Direction, Edge, EdgeId, HalfPlane, LatticePath, Vertex, Window};
use crate::weights::{EdgeWeightField, EdgeWeights};

/// Parent-direction byte for vertices without a parent.
pub const NO_PARENT: u8 = 0xFF;

const MAGIC: &[u8; 4] = b"FPPT";
const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 * 5 + 8;

/// Shortest-path tree from one source over a window.
///
/// Unreached vertices (outside a half-plane, or beyond an early stop) have
/// infinite distance and no parent.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicTree {
    source: Vertex,
    window: Window,
    dist: Vec<f64>,
    parent: Vec<u8>,
    /// Reached vertices in nondecreasing distance order; parents precede children.
    order: Vec<u32>,
}

impl GeodesicTree {
    pub fn source(&self) -> Vertex {
        self.source
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dist(&self, v: Vertex) -> Option<f64> {
        let d = self.dist[self.window.index(v)?];
        d.is_finite().then_some(d)
    }

    /// Distance by window index; `INFINITY` when unreached.
    #[inline]
    pub fn dist_at(&self, idx: usize) -> f64 {
        self.dist[idx]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn parent_dir_at(&self, idx: usize) -> Option<Direction> {
        match self.parent[idx] {
            NO_PARENT => None,
            d => Some(Direction::from_index(d)),
        }
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        let idx = self.window.index(v)?;
        self.parent_dir_at(idx).map(|d| v.step(d))
    }

    #[inline]
    pub fn parent_index(&self, idx: usize) -> Option<usize> {
        let d = self.parent_dir_at(idx)?;
        let v = self.window.vertex(idx);
        Some(self.window.index_unchecked(v.step(d)))
    }

    pub fn is_reached(&self, v: Vertex) -> bool {
        self.dist(v).is_some()
    }

    pub fn reached_count(&self) -> usize {
        self.order.len()
    }

    /// Reached vertex indices, parents before children.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Tree path from the source to `v`.
    pub fn path_to(&self, v: Vertex) -> Result<LatticePath> {
        let mut idx = self
            .window
            .index(v)
            .ok_or_else(|| FppError::Bounds(format!("{v} outside the tree's window")))?;
        if !self.dist[idx].is_finite() {
            return Err(FppError::Internal(format!("{v} is not reached from {}", self.source)));
        }
        let mut rev = vec![v];
        while let Some(p) = self.parent_index(idx) {
            rev.push(self.window.vertex(p));
            idx = p;
            if rev.len() > self.window.len() {
                return Err(FppError::Internal("parent pointers contain a cycle".into()));
            }
        }
        rev.reverse();
        LatticePath::new(rev)
    }

    /// Children lists in compressed form: `children(idx)` are the tree
    /// children of vertex `idx`, in E, N, W, S order.
    pub fn children(&self) -> Children {
        let n = self.window.len();
        let mut count = vec![0u32; n + 1];
        for &c in &self.order {
            if let Some(p) = self.parent_index(c as usize) {
                count[p + 1] += 1;
            }
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut items = vec![0u32; *count.last().unwrap() as usize];
        for idx in 0..n {
            // Children of p are the neighbours whose parent points back at p.
            if let Some(p) = self.parent_index(idx) {
                let slot = &mut fill[p];
                items[*slot as usize] = idx as u32;
                *slot += 1;
            }
        }
        // Re-sort each list by direction from the parent for a fixed order.
        for p in 0..n {
            let (s, e) = (count[p] as usize, count[p + 1] as usize);
            if e - s > 1 {
                let pv = self.window.vertex(p);
                items[s..e].sort_by_key(|&c| pv.direction_to(self.window.vertex(c as usize)).map(|d| d as u8));
            }
        }
        Children { offsets: count, items }
    }

    /// Checks `dist(v) = dist(parent(v)) + weight(parent(v), v)` exactly for
    /// every reached non-source vertex, and `dist(source) = 0`.
    pub fn verify<W: EdgeWeights>(&self, weights: &W) -> Result<()> {
        let s = self.window.index_unchecked(self.source);
        if self.dist[s] != 0.0 || self.parent[s] != NO_PARENT {
            return Err(FppError::Internal("source must have distance 0 and no parent".into()));
        }
        for &c in &self.order {
            let c = c as usize;
            if c == s {
                continue;
            }
            let v = self.window.vertex(c);
            let d = self.parent_dir_at(c).ok_or_else(|| FppError::Internal(format!("{v} reached without parent")))?;
            let p = self.window.index_unchecked(v.step(d));
            let w = weights.weight(&Edge::from_step(v, d));
            if self.dist[p] + w != self.dist[c] {
                return Err(FppError::Internal(format!(
                    "{v}: dist {} != parent dist {} + weight {w}",
                    self.dist[c], self.dist[p]
                )));
            }
        }
        Ok(())
    }

    /// Assembles a tree from raw parts, validating the structure. Distances
    /// of unreached vertices must be `INFINITY` with parent [`NO_PARENT`].
    pub fn from_parts(source: Vertex, window: Window, dist: Vec<f64>, parent: Vec<u8>) -> Result<GeodesicTree> {
        let n = window.len();
        if dist.len() != n || parent.len() != n {
            return Err(FppError::Format(format!("expected {n} vertices, got {} / {}", dist.len(), parent.len())));
        }
        let s = window
            .index(source)
            .ok_or_else(|| FppError::Domain(format!("source {source} outside window")))?;
        if dist[s] != 0.0 || parent[s] != NO_PARENT {
            return Err(FppError::Format("source must have distance 0 and no parent".into()));
        }
        for idx in 0..n {
            let (d, p) = (dist[idx], parent[idx]);
            if d.is_nan() || d < 0.0 {
                return Err(FppError::Format(format!("vertex {idx}: invalid distance {d}")));
            }
            let reached = d.is_finite();
            match (idx == s, reached, p) {
                (true, _, _) => {}
                (false, false, NO_PARENT) => {}
                (false, true, 0..=3) => {
                    let v = window.vertex(idx);
                    let pv = v.step(Direction::from_index(p));
                    let pi = window
                        .index(pv)
                        .ok_or_else(|| FppError::Format(format!("parent of {v} leaves the window")))?;
                    if !(dist[pi] < d) {
                        return Err(FppError::Format(format!("parent of {v} is not strictly closer")));
                    }
                }
                _ => return Err(FppError::Format(format!("vertex {idx}: inconsistent parent byte {p}"))),
            }
        }
        let mut order: Vec<u32> = (0..n as u32).filter(|&i| dist[i as usize].is_finite()).collect();
        order.sort_by(|&a, &b| dist[a as usize].total_cmp(&dist[b as usize]).then(a.cmp(&b)));
        Ok(GeodesicTree { source, window, dist, parent, order })
    }

    /// Compact binary form: `"FPPT"`, version byte, source (x, y), window
    /// centre (x, y), half-width, vertex count (all little-endian, i32/u32
    /// then u64), followed by one `(f64 dist, u8 parent direction)` record
    /// per window vertex in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.window.len();
        let mut out = Vec::with_capacity(HEADER_LEN + 9 * n);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&self.source.x.to_le_bytes());
        out.extend_from_slice(&self.source.y.to_le_bytes());
        out.extend_from_slice(&self.window.center().x.to_le_bytes());
        out.extend_from_slice(&self.window.center().y.to_le_bytes());
        out.extend_from_slice(&self.window.half_width().to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for i in 0..n {
            out.extend_from_slice(&self.dist[i].to_le_bytes());
            out.push(self.parent[i]);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<GeodesicTree> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(FppError::Format("not a geodesic tree record".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(FppError::Format(format!("unsupported tree format version {}", bytes[4])));
        }
        let word = |k: usize| -> [u8; 4] { bytes[5 + 4 * k..9 + 4 * k].try_into().unwrap() };
        let source = Vertex::new(i32::from_le_bytes(word(0)), i32::from_le_bytes(word(1)));
        let center = Vertex::new(i32::from_le_bytes(word(2)), i32::from_le_bytes(word(3)));
        let window = Window::new(center, u32::from_le_bytes(word(4)))?;
        let count = u64::from_le_bytes(bytes[25..33].try_into().unwrap()) as usize;
        if count != window.len() || bytes.len() != HEADER_LEN + 9 * count {
            return Err(FppError::Format("vertex count does not match the window".into()));
        }
        let mut dist = Vec::with_capacity(count);
        let mut parent = Vec::with_capacity(count);
        for rec in bytes[HEADER_LEN..].chunks_exact(9) {
            dist.push(f64::from_le_bytes(rec[..8].try_into().unwrap()));
            parent.push(rec[8]);
        }
        GeodesicTree::from_parts(source, window, dist, parent)
    }
}

/// Compressed children lists of a [`GeodesicTree`].
#[derive(Clone, Debug)]
pub struct Children {
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl Children {
    #[inline]
    pub fn of(&self, idx: usize) -> &[u32] {
        &self.items[self.offsets[idx] as usize..self.offsets[idx + 1] as usize]
    }
}

/// A geodesic between two vertices together with its passage time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicSegment {
    pub path: LatticePath,
    pub weight: f64,
}

impl GeodesicSegment {
    pub fn from(&self) -> Vertex {
        self.path.root()
    }

    pub fn to(&self) -> Vertex {
        self.path.end()
    }

    /// Sum of edge weights along the path, accumulated from the source.
    pub fn recompute_weight<W: EdgeWeights>(&self, weights: &W) -> f64 {
        self.path.edges().map(|e| weights.weight(&e)).sum()
    }
}

/// A field with every edge that has an endpoint outside `halfplane` removed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RestrictedField {
    pub base: EdgeWeightField,
    pub halfplane: HalfPlane,
}

impl RestrictedField {
    pub fn new(base: EdgeWeightField, halfplane: HalfPlane) -> Self {
        Self { base, halfplane }
    }
}

impl EdgeWeights for RestrictedField {
    #[inline]
    fn weight_of(&self, e: &Edge, id: EdgeId) -> f64 {
        let (a, b) = e.endpoints();
        if self.halfplane.contains(a) && self.halfplane.contains(b) {
            self.base.weight_by_id(id)
        } else {
            f64::INFINITY
        }
    }
}

/// Label-setting Dijkstra. With `stop_at` nonempty, stops once all listed
/// vertices are settled and forgets tentative labels of unsettled vertices.
fn dijkstra<W: EdgeWeights>(weights: &W, source: Vertex, window: &Window, stop_at: &[Vertex]) -> Result<GeodesicTree> {
    let s = window
        .index(source)
        .ok_or_else(|| FppError::Domain(format!("source {source} outside window {window:?}")))?;
    let n = window.len();
    let side = window.side();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![NO_PARENT; n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(if stop_at.is_empty() { n } else { n / 4 });

    let mut pending: Vec<usize> = Vec::with_capacity(stop_at.len());
    for &t in stop_at {
        let ti = window
            .index(t)
            .ok_or_else(|| FppError::Bounds(format!("target {t} outside window")))?;
        if !pending.contains(&ti) {
            pending.push(ti);
        }
    }
    let early = !pending.is_empty();
    let mut is_target = if early { vec![false; n] } else { Vec::new() };
    for &t in &pending {
        is_target[t] = true;
    }
    let mut remaining = pending.len();

    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::with_capacity(1024);
    dist[s] = 0.0;
    heap.push(Reverse((0f64.to_bits(), s as u32)));

    while let Some(Reverse((bits, u))) = heap.pop() {
        let u = u as usize;
        if settled[u] || f64::from_bits(bits) != dist[u] {
            continue;
        }
        settled[u] = true;
        order.push(u as u32);
        if early && is_target[u] {
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        let du = dist[u];
        let uv = window.vertex(u);
        let col = u % side;
        let row = u / side;
        for dir in Direction::ALL {
            let v = match dir {
                Direction::East if col + 1 < side => u + 1,
                Direction::North if row + 1 < side => u + side,
                Direction::West if col > 0 => u - 1,
                Direction::South if row > 0 => u - side,
                _ => continue,
            };
            if settled[v] {
                continue;
            }
            let edge = Edge::from_step(uv, dir);
            let id = edge_id_unchecked(&edge);
            let w = weights.weight_of(&edge, id);
            if !w.is_finite() {
                continue;
            }
            let nd = du + w;
            let back = dir.opposite() as u8;
            if nd < dist[v] {
                dist[v] = nd;
                parent[v] = back;
                heap.push(Reverse((nd.to_bits(), v as u32)));
            } else if nd == dist[v] {
                let vv = window.vertex(v);
                let current = edge_id_unchecked(&Edge::from_step(vv, Direction::from_index(parent[v])));
                if id < current {
                    parent[v] = back;
                }
            }
        }
    }

    if early {
        for i in 0..n {
            if !settled[i] {
                dist[i] = f64::INFINITY;
                parent[i] = NO_PARENT;
            }
        }
    }
    Ok(GeodesicTree {
        source,
        window: *window,
        dist,
        parent,
        order,
    })
}

/// Exact single-source passage times and geodesics over `window`.
pub fn shortest_path_tree<W: EdgeWeights>(weights: &W, source: Vertex, window: &Window) -> Result<GeodesicTree> {
    dijkstra(weights, source, window, &[])
}

/// Like [`shortest_path_tree`] but stops as soon as every target is
/// settled. Settled vertices carry their final distances and parents;
/// everything else is reported unreached.
pub fn partial_tree<W: EdgeWeights>(
    weights: &W,
    source: Vertex,
    window: &Window,
    targets: &[Vertex],
) -> Result<GeodesicTree> {
    if targets.is_empty() {
        return Err(FppError::Domain("partial tree needs at least one target".into()));
    }
    dijkstra(weights, source, window, targets)
}

/// The geodesic from `x` to `y` inside `window`.
pub fn geodesic<W: EdgeWeights>(weights: &W, x: Vertex, y: Vertex, window: &Window) -> Result<GeodesicSegment> {
    if !window.contains(y) {
        return Err(FppError::Bounds(format!("{y} outside window")));
    }
    let tree = dijkstra(weights, x, window, &[y])?;
    segment_from_tree(&tree, y)
}

pub fn segment_from_tree(tree: &GeodesicTree, y: Vertex) -> Result<GeodesicSegment> {
    let weight = tree
        .dist(y)
        .ok_or_else(|| FppError::Internal(format!("{y} unreachable from {} within the window", tree.source())))?;
    Ok(GeodesicSegment { path: tree.path_to(y)?, weight })
}

/// Passage-time tree for the half-plane-restricted metric. Vertices outside
/// the half-plane stay unreached.
pub fn halfplane_tree(restricted: &RestrictedField, source: Vertex, window: &Window) -> Result<GeodesicTree> {
    if !restricted.halfplane.contains(source) {
        return Err(FppError::Domain(format!("source {source} outside the half-plane")));
    }
    dijkstra(restricted, source, window, &[])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Changed,
    /// The small-window geodesic touches the small window's boundary, so
    /// the truncation is suspect whatever the comparison says.
    BoundaryContact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub verdict: Stability,
    pub small: GeodesicSegment,
    pub large: GeodesicSegment,
}

/// Recomputes Geo(x, y) in `large` and compares with the geodesic in `small`.
pub fn window_stability_check<W: EdgeWeights>(
    weights: &W,
    x: Vertex,
    y: Vertex,
    small: &Window,
    large: &Window,
) -> Result<StabilityReport> {
    if !large.contains_window(small) {
        return Err(FppError::Domain("small window is not contained in the large window".into()));
    }
    let small_geo = geodesic(weights, x, y, small)?;
    let large_geo = geodesic(weights, x, y, large)?;
    let verdict = if small_geo.path.vertices().iter().any(|v| small.on_boundary(*v)) {
        Stability::BoundaryContact
    } else if small_geo.path == large_geo.path && small_geo.weight == large_geo.weight {
        Stability::Stable
    } else {
        Stability::Changed
    };
    Ok(StabilityReport {
        verdict,
        small: small_geo,
        large: large_geo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightDistribution;

    fn exp_field(seed: u64) -> EdgeWeightField {
        EdgeWeightField::new(seed, WeightDistribution::Exponential { rate: 1.0 }).unwrap()
    }

    fn unit_field() -> EdgeWeightField {
        EdgeWeightField::new(0, WeightDistribution::ConstantOne).unwrap()
    }

    #[test]
    fn unit_weights_give_l1_distance() {
        let w = Window::new(Vertex::ORIGIN, 3).unwrap();
        let src = Vertex::new(1, -1);
        let t = shortest_path_tree(&unit_field(), src, &w).unwrap();
        for v in w.vertices() {
            assert_eq!(t.dist(v).unwrap(), v.l1(src) as f64);
        }
        t.verify(&unit_field()).unwrap();
    }

    #[test]
    fn source_has_zero_distance() {
        let w = Window::new(Vertex::new(2, 2), 5).unwrap();
        let t = shortest_path_tree(&exp_field(3), Vertex::new(2, 2), &w).unwrap();
        assert_eq!(t.dist(Vertex::new(2, 2)), Some(0.0));
        assert!(t.distances().iter().all(|d| *d >= 0.0));
        assert_eq!(t.reached_count(), w.len());
        t.verify(&exp_field(3)).unwrap();
    }

    #[test]
    fn source_outside_window_is_domain_error() {
        let w = Window::new(Vertex::ORIGIN, 2).unwrap();
        let err = shortest_path_tree(&unit_field(), Vertex::new(5, 0), &w).unwrap_err();
        assert!(matches!(err, FppError::Domain(_)));
    }

    #[test]
    fn trivial_geodesic() {
        let w = Window::new(Vertex::ORIGIN, 4).unwrap();
        let g = geodesic(&exp_field(1), Vertex::new(1, 2), Vertex::new(1, 2), &w).unwrap();
        assert_eq!(g.path.vertices(), &[Vertex::new(1, 2)]);
        assert_eq!(g.weight, 0.0);
    }

    #[test]
    fn geodesic_weight_symmetric_and_exact() {
        let f = exp_field(21);
        let w = Window::new(Vertex::ORIGIN, 10).unwrap();
        let mut state = 99u64;
        for _ in 0..100 {
            state = crate::weights::fmix(state.wrapping_add(1));
            let x = Vertex::new((state % 21) as i32 - 10, ((state >> 8) % 21) as i32 - 10);
            let y = Vertex::new(((state >> 16) % 21) as i32 - 10, ((state >> 24) % 21) as i32 - 10);
            let a = geodesic(&f, x, y, &w).unwrap();
            let b = geodesic(&f, y, x, &w).unwrap();
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.recompute_weight(&f), a.weight);
            assert!(a.path.is_self_avoiding());
            // Continuous weights: the reverse geodesic is the same path.
            let mut rev = b.path.vertices().to_vec();
            rev.reverse();
            assert_eq!(a.path.vertices(), &rev[..]);
        }
    }

    #[test]
    fn partial_tree_agrees_with_full_tree_on_settled_vertices() {
        let f = exp_field(8);
        let w = Window::new(Vertex::ORIGIN, 20).unwrap();
        let full = shortest_path_tree(&f, Vertex::ORIGIN, &w).unwrap();
        let part = partial_tree(&f, Vertex::ORIGIN, &w, &[Vertex::new(6, 3)]).unwrap();
        assert!(part.reached_count() < full.reached_count());
        for v in w.vertices() {
            if let Some(d) = part.dist(v) {
                assert_eq!(Some(d), full.dist(v));
                assert_eq!(part.parent(v), full.parent(v));
            }
        }
        part.verify(&f).unwrap();
    }

    #[test]
    fn unit_ties_break_by_edge_id() {
        // Two equal routes to (1,1): via (1,0) or via (0,1). The candidate
        // edges into (1,1) are the horizontal edge based at (0,1) and the
        // vertical edge based at (1,0); the smaller id wins.
        let w = Window::new(Vertex::ORIGIN, 2).unwrap();
        let t = shortest_path_tree(&unit_field(), Vertex::ORIGIN, &w).unwrap();
        let target = Vertex::new(1, 1);
        let via_south = edge_id_unchecked(&Edge::from_step(target, Direction::South));
        let via_west = edge_id_unchecked(&Edge::from_step(target, Direction::West));
        let expected = if via_south < via_west { Vertex::new(1, 0) } else { Vertex::new(0, 1) };
        assert_eq!(t.parent(target), Some(expected));
        // Deterministic across recomputation.
        assert_eq!(t, shortest_path_tree(&unit_field(), Vertex::ORIGIN, &w).unwrap());
    }

    #[test]
    fn halfplane_everything_equals_unrestricted() {
        let f = exp_field(4);
        let w = Window::new(Vertex::ORIGIN, 8).unwrap();
        let h = HalfPlane::new(0, Vertex::new(-1000, 0)).unwrap();
        let a = halfplane_tree(&RestrictedField::new(f, h), Vertex::ORIGIN, &w).unwrap();
        let b = shortest_path_tree(&f, Vertex::ORIGIN, &w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn right_halfplane_excludes_left() {
        let f = exp_field(6);
        let w = Window::new(Vertex::ORIGIN, 8).unwrap();
        let h = HalfPlane::new(0, Vertex::ORIGIN).unwrap();
        let r = RestrictedField::new(f, h);
        let t = halfplane_tree(&r, Vertex::ORIGIN, &w).unwrap();
        let full = shortest_path_tree(&f, Vertex::ORIGIN, &w).unwrap();
        for v in w.vertices() {
            match t.dist(v) {
                Some(d) => {
                    assert!(v.x >= 0);
                    assert!(t.path_to(v).unwrap().vertices().iter().all(|u| u.x >= 0));
                    assert!(d >= full.dist(v).unwrap());
                }
                None => assert!(v.x < 0),
            }
        }
        t.verify(&r).unwrap();
        let outside = halfplane_tree(&r, Vertex::new(-1, 0), &w).unwrap_err();
        assert!(matches!(outside, FppError::Domain(_)));
    }

    #[test]
    fn binary_round_trip() {
        let f = exp_field(12);
        let w = Window::new(Vertex::new(-3, 4), 6).unwrap();
        let h = HalfPlane::new(1, Vertex::new(-3, 4)).unwrap();
        for t in [
            shortest_path_tree(&f, Vertex::new(-2, 4), &w).unwrap(),
            halfplane_tree(&RestrictedField::new(f, h), Vertex::new(-2, 5), &w).unwrap(),
        ] {
            let bytes = t.to_bytes();
            assert_eq!(bytes.len(), HEADER_LEN + 9 * w.len());
            let back = GeodesicTree::from_bytes(&bytes).unwrap();
            assert_eq!(back.to_bytes(), bytes);
            for v in w.vertices() {
                assert_eq!(back.dist(v), t.dist(v));
                assert_eq!(back.parent(v), t.parent(v));
            }
        }
        assert!(GeodesicTree::from_bytes(b"nope").is_err());
    }

    #[test]
    fn corrupted_bytes_rejected() {
        let f = exp_field(2);
        let w = Window::new(Vertex::ORIGIN, 2).unwrap();
        let mut bytes = shortest_path_tree(&f, Vertex::ORIGIN, &w).unwrap().to_bytes();
        // Point the first record's parent outside the window.
        bytes[HEADER_LEN + 8] = Direction::West as u8;
        assert!(GeodesicTree::from_bytes(&bytes).is_err());
    }

    #[test]
    fn stability_unit_interior_geodesic() {
        let f = unit_field();
        let small = Window::new(Vertex::ORIGIN, 8).unwrap();
        let large = Window::new(Vertex::ORIGIN, 16).unwrap();
        let r = window_stability_check(&f, Vertex::new(-3, 0), Vertex::new(3, 2), &small, &large).unwrap();
        assert_eq!(r.verdict, Stability::Stable);
    }

    #[test]
    fn stability_flags_boundary_contact() {
        let f = unit_field();
        let small = Window::new(Vertex::ORIGIN, 4).unwrap();
        let large = Window::new(Vertex::ORIGIN, 8).unwrap();
        let r = window_stability_check(&f, Vertex::new(0, 0), Vertex::new(4, 0), &small, &large).unwrap();
        assert_eq!(r.verdict, Stability::BoundaryContact);
    }
}
