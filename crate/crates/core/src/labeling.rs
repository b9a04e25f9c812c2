//! Flow labelings of geodesic trees.
//!
//! Unit mass enters at the root of a geodesic tree and splits equally at
//! every branch point until it leaves the window. Leaves are ordered
//! counterclockwise from a reference leaf path, and the cumulative mass up
//! to a leaf gives it a value in `[0, 1]`. Averaging these values over the
//! members of a sparse Voronoi class gives labels that are monotone in the
//! counterclockwise order across the whole class.
//!
//! "Flow to infinity" is read as flow to the window boundary: the flow
//! tree keeps, for every boundary vertex whose tree path meets the
//! boundary nowhere else, the path from the root to it. Those boundary
//! vertices are the leaves.
//!
//! Paths from different roots are compared by where their leaves sit on the
//! boundary cycle, read counterclockwise from the shared reference leaf.
//! Within one tree this agrees with the planar counterclockwise order.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FppError, Result};
use crate::lattice::{side_of, Departure, Direction, Edge, LatticePath, Vertex, Window};
use crate::metric::{shortest_path_tree, GeodesicTree};
use crate::weights::{EdgeWeights, VertexNoise};

/// Equal-split unit flow from the root of a tree to the window boundary.
#[derive(Clone, Debug)]
pub struct TreeFlow {
    tree: GeodesicTree,
    /// Mass on the edge from the parent into each vertex; 1 at the root, 0
    /// off the flow tree.
    mass: Vec<f64>,
    kept: Vec<bool>,
    child_offsets: Vec<u32>,
    child_items: Vec<u32>,
    leaves: Vec<u32>,
}

impl TreeFlow {
    pub fn tree(&self) -> &GeodesicTree {
        &self.tree
    }

    pub fn root(&self) -> Vertex {
        self.tree.source()
    }

    pub fn window(&self) -> &Window {
        self.tree.window()
    }

    /// Whether `v` lies on the flow tree (on a root-to-leaf path).
    pub fn carries(&self, v: Vertex) -> bool {
        self.window().index(v).is_some_and(|i| self.kept[i])
    }

    /// Flow children of vertex `idx`, in E, N, W, S order.
    pub fn children_of(&self, idx: usize) -> &[u32] {
        &self.child_items[self.child_offsets[idx] as usize..self.child_offsets[idx + 1] as usize]
    }

    pub fn mass_into(&self, v: Vertex) -> f64 {
        self.window().index(v).map_or(0.0, |i| self.mass[i])
    }

    /// Mass on a tree edge; zero for edges the flow does not use.
    pub fn edge_mass(&self, e: &Edge) -> f64 {
        let (a, b) = e.endpoints();
        for (p, c) in [(a, b), (b, a)] {
            if self.carries(c) && self.tree.parent(c) == Some(p) {
                return self.mass_into(c);
            }
        }
        0.0
    }

    pub fn leaves(&self) -> Vec<Vertex> {
        self.leaves.iter().map(|&i| self.window().vertex(i as usize)).collect()
    }

    pub fn leaf_indices(&self) -> &[u32] {
        &self.leaves
    }

    pub fn is_leaf(&self, v: Vertex) -> bool {
        self.window()
            .index(v)
            .is_some_and(|i| self.kept[i] && self.children_of(i).is_empty())
    }

    /// Flow-tree edges as (parent, child, mass), parents first.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex, f64)> + '_ {
        let w = *self.window();
        self.tree.order().iter().filter_map(move |&c| {
            let c = c as usize;
            if !self.kept[c] {
                return None;
            }
            let p = self.tree.parent_index(c)?;
            Some((w.vertex(p), w.vertex(c), self.mass[c]))
        })
    }

    /// Largest violation of inflow = outflow over internal flow vertices,
    /// together with `|1 - Σ leaf mass|`.
    pub fn conservation_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &v in self.tree.order() {
            let v = v as usize;
            let kids = self.children_of(v);
            if !self.kept[v] || kids.is_empty() {
                continue;
            }
            let out: f64 = kids.iter().map(|&c| self.mass[c as usize]).sum();
            worst = worst.max((out - self.mass[v]).abs());
        }
        let total: f64 = self.leaves.iter().map(|&l| self.mass[l as usize]).sum();
        worst.max((total - 1.0).abs())
    }
}

/// Equal-split unit flow on `tree`, truncated at the window boundary.
pub fn unit_flow(tree: &GeodesicTree) -> Result<TreeFlow> {
    let window = *tree.window();
    let n = window.len();
    let root = window.index_unchecked(tree.source());
    let order = tree.order();

    // alive: no proper ancestor is a boundary vertex.
    let mut alive = vec![false; n];
    let mut is_leaf = vec![false; n];
    for &v in order {
        let v = v as usize;
        let ok = match tree.parent_index(v) {
            None => v == root,
            Some(p) => alive[p] && !is_leaf[p],
        };
        alive[v] = ok;
        is_leaf[v] = ok && window.on_boundary(window.vertex(v));
    }
    // A root on the boundary is its own single leaf.
    if is_leaf[root] {
        let mut mass = vec![0.0; n];
        mass[root] = 1.0;
        let mut kept = vec![false; n];
        kept[root] = true;
        return Ok(TreeFlow {
            tree: tree.clone(),
            mass,
            kept,
            child_offsets: vec![0; n + 1],
            child_items: Vec::new(),
            leaves: vec![root as u32],
        });
    }

    let mut kept = is_leaf.clone();
    for &v in order.iter().rev() {
        let v = v as usize;
        if kept[v] && v != root {
            if let Some(p) = tree.parent_index(v) {
                kept[p] = true;
            }
        }
    }
    if !kept[root] {
        return Err(FppError::Degenerate(format!(
            "tree rooted at {} never reaches the window boundary",
            tree.source()
        )));
    }

    let children = tree.children();
    let mut child_offsets = vec![0u32; n + 1];
    let mut child_items = Vec::new();
    for v in 0..n {
        if kept[v] && !is_leaf[v] {
            child_items.extend(children.of(v).iter().copied().filter(|&c| kept[c as usize]));
        }
        child_offsets[v + 1] = child_items.len() as u32;
    }

    let mut mass = vec![0.0; n];
    mass[root] = 1.0;
    for &v in order {
        let v = v as usize;
        if !kept[v] {
            continue;
        }
        let kids = &child_items[child_offsets[v] as usize..child_offsets[v + 1] as usize];
        if kids.is_empty() {
            continue;
        }
        let share = mass[v] / kids.len() as f64;
        for &c in kids {
            mass[c as usize] = share;
        }
    }
    let leaves = order.iter().copied().filter(|&v| is_leaf[v as usize]).collect();
    Ok(TreeFlow {
        tree: tree.clone(),
        mass,
        kept,
        child_offsets,
        child_items,
        leaves,
    })
}

/// Values `M(Γ★, g]` for every leaf of a flow.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CumulativeFlow {
    pub root: Vertex,
    /// Leaves in counterclockwise order; the reference leaf comes first.
    pub order: Vec<Vertex>,
    /// Leaf masses aligned with `order`.
    pub mass: Vec<f64>,
    /// Cumulative values aligned with `order`. The reference leaf holds 1
    /// (it is both minimal and maximal); the others hold running sums of
    /// mass strictly after the reference up to and including themselves.
    pub value: Vec<f64>,
}

impl CumulativeFlow {
    pub fn reference_leaf(&self) -> Vertex {
        self.order[0]
    }

    pub fn value_of(&self, leaf: Vertex) -> Option<f64> {
        self.order.iter().position(|&l| l == leaf).map(|i| self.value[i])
    }
}

fn check_reference(flow: &TreeFlow, reference: &LatticePath) -> Result<()> {
    if reference.root() != flow.root() {
        return Err(FppError::Domain(format!(
            "reference starts at {}, tree is rooted at {}",
            reference.root(),
            flow.root()
        )));
    }
    let end = reference.end();
    if !flow.is_leaf(end) {
        return Err(FppError::Domain(format!("reference ends at {end}, which is not a flow leaf")));
    }
    if flow.tree().path_to(end)? != *reference {
        return Err(FppError::Domain("reference path is not a path of the tree".into()));
    }
    Ok(())
}

/// Flow leaves in counterclockwise order starting with the reference leaf.
///
/// Branches leaving the reference on its left come right after it, the
/// farther from the root the earlier; branches at the root follow in ccw
/// order; branches leaving on the right come last, the farther the later.
/// Off the reference, children are visited ccw from the edge to the parent.
pub fn ccw_leaf_order(flow: &TreeFlow, reference: &LatticePath) -> Result<Vec<Vertex>> {
    check_reference(flow, reference)?;
    let w = *flow.window();
    let rv = reference.vertices();
    let m = rv.len() - 1;
    let ridx: Vec<usize> = rv.iter().map(|v| w.index_unchecked(*v)).collect();

    let mut left: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut right: Vec<Vec<u32>> = vec![Vec::new(); m];
    for k in 0..m {
        let ref_out = rv[k].direction_to(rv[k + 1]).expect("validated path");
        let back = (k > 0).then(|| rv[k].direction_to(rv[k - 1]).expect("validated path"));
        let mut kids: Vec<(u8, u32, bool)> = flow
            .children_of(ridx[k])
            .iter()
            .filter(|&&c| c as usize != ridx[k + 1])
            .map(|&c| {
                let d = rv[k].direction_to(w.vertex(c as usize)).expect("tree edge");
                let is_left = back.map_or(true, |b| side_of(d, ref_out, b) == Departure::Left);
                (d.ccw_rank_from(ref_out), c, is_left)
            })
            .collect();
        kids.sort_unstable();
        for (_, c, is_left) in kids {
            if is_left {
                left[k].push(c);
            } else {
                right[k].push(c);
            }
        }
    }

    let mut out = vec![rv[m]];
    for k in (0..m).rev() {
        for &c in &left[k] {
            subtree_leaves(flow, c as usize, &mut out);
        }
    }
    for k in 0..m {
        for &c in &right[k] {
            subtree_leaves(flow, c as usize, &mut out);
        }
    }
    Ok(out)
}

/// Appends the leaves below `start` in ccw order (children swept ccw from
/// the edge back to the parent).
fn subtree_leaves(flow: &TreeFlow, start: usize, out: &mut Vec<Vertex>) {
    let w = *flow.window();
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        let kids = flow.children_of(v);
        let vv = w.vertex(v);
        if kids.is_empty() {
            out.push(vv);
            continue;
        }
        let back: Direction = flow
            .tree()
            .parent_dir_at(v)
            .expect("non-root flow vertex has a parent");
        let mut ranked: Vec<(u8, u32)> = kids
            .iter()
            .map(|&c| (vv.direction_to(w.vertex(c as usize)).expect("tree edge").ccw_rank_from(back), c))
            .collect();
        ranked.sort_unstable();
        // Stack: push in reverse so the lowest rank is visited first.
        stack.extend(ranked.iter().rev().map(|&(_, c)| c as usize));
    }
}

/// Cumulative flow values of every leaf relative to `reference`.
pub fn cumulative_flow(flow: &TreeFlow, reference: &LatticePath) -> Result<CumulativeFlow> {
    let order = ccw_leaf_order(flow, reference)?;
    let mass: Vec<f64> = order.iter().map(|&l| flow.mass_into(l)).collect();
    let mut value = Vec::with_capacity(order.len());
    value.push(1.0);
    let mut running = 0.0;
    for &m in &mass[1..] {
        running += m;
        value.push(running);
    }
    Ok(CumulativeFlow {
        root: flow.root(),
        order,
        mass,
        value,
    })
}

/// Flow leaf nearest (in ℓ1, then by boundary position) to `target`.
pub fn nearest_leaf(flow: &TreeFlow, target: Vertex) -> Vertex {
    let w = *flow.window();
    flow.leaves()
        .into_iter()
        .min_by_key(|&l| (l.l1(target), w.boundary_position(l).unwrap_or(usize::MAX)))
        .expect("flows have at least one leaf")
}

/// Default reference: the tree path to the leaf nearest the east boundary
/// point on the root's row.
pub fn east_reference(flow: &TreeFlow) -> Result<LatticePath> {
    let w = *flow.window();
    let target = Vertex::new(w.center().x + w.half_width() as i32, flow.root().y);
    flow.tree().path_to(nearest_leaf(flow, target))
}

/// Sparse-site Voronoi partition of a window at level `i`.
#[derive(Clone, Debug)]
pub struct VoronoiPartition {
    level: u32,
    window: Window,
    sites: Vec<Vertex>,
    site_noise: Vec<f64>,
    assignment: Vec<u32>,
}

impl VoronoiPartition {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Sites `S_i = {z : ξ_z <= 4^-i}` in row-major order; class ids index this list.
    pub fn sites(&self) -> &[Vertex] {
        &self.sites
    }

    pub fn class_count(&self) -> usize {
        self.sites.len()
    }

    pub fn class_of(&self, v: Vertex) -> Option<u32> {
        self.window.index(v).map(|i| self.assignment[i])
    }

    pub fn site_of(&self, v: Vertex) -> Option<Vertex> {
        self.class_of(v).map(|c| self.sites[c as usize])
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn members(&self, class: u32) -> Vec<Vertex> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(i, _)| self.window.vertex(i))
            .collect()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.sites.len()];
        for &c in &self.assignment {
            sizes[c as usize] += 1;
        }
        sizes
    }

    /// Fraction of nearest-neighbour pairs inside the window whose endpoints
    /// fall in different classes.
    pub fn disagreement_fraction(&self) -> f64 {
        let side = self.window.side();
        let mut differ = 0u64;
        let mut total = 0u64;
        for i in 0..self.assignment.len() {
            let (col, row) = (i % side, i / side);
            if col + 1 < side {
                total += 1;
                differ += (self.assignment[i] != self.assignment[i + 1]) as u64;
            }
            if row + 1 < side {
                total += 1;
                differ += (self.assignment[i] != self.assignment[i + side]) as u64;
            }
        }
        differ as f64 / total as f64
    }

    pub fn site_noise(&self, class: u32) -> f64 {
        self.site_noise[class as usize]
    }
}

/// Site threshold `4^-level`.
pub fn site_threshold(level: u32) -> f64 {
    0.25f64.powi(level as i32)
}

/// Assigns every window vertex to its ℓ1-nearest site, ties to the site
/// with the smaller ξ.
///
/// Multi-source breadth-first search: inside a box the grid metric is ℓ1,
/// and the nearest sites of a vertex at distance `d` are exactly the nearest
/// sites of its neighbours at distance `d - 1`, so carrying the best label
/// forward layer by layer is exact.
pub fn voronoi_partition(noise: &VertexNoise, level: u32, window: &Window) -> Result<VoronoiPartition> {
    if level == 0 {
        return Err(FppError::Domain("level must be at least 1".into()));
    }
    let threshold = site_threshold(level);
    let n = window.len();
    let side = window.side();
    let xi: Vec<f64> = window.vertices().map(|v| noise.value(v)).collect();
    let site_idx: Vec<usize> = (0..n).filter(|&i| xi[i] <= threshold).collect();
    if site_idx.is_empty() {
        return Err(FppError::RetryNeeded { level, sites: 0 });
    }
    let sites: Vec<Vertex> = site_idx.iter().map(|&i| window.vertex(i)).collect();
    let site_noise: Vec<f64> = site_idx.iter().map(|&i| xi[i]).collect();
    let better = |a: u32, b: u32| -> bool {
        let (na, nb) = (site_noise[a as usize], site_noise[b as usize]);
        na < nb || (na == nb && a < b)
    };

    const UNSET: u32 = u32::MAX;
    let mut dist = vec![UNSET; n];
    let mut label = vec![UNSET; n];
    let mut queue = VecDeque::with_capacity(n);
    for (class, &i) in site_idx.iter().enumerate() {
        dist[i] = 0;
        label[i] = class as u32;
        queue.push_back(i);
    }
    while let Some(u) = queue.pop_front() {
        let (col, row) = (u % side, u / side);
        let nbrs = [
            (col + 1 < side).then(|| u + 1),
            (row + 1 < side).then(|| u + side),
            (col > 0).then(|| u - 1),
            (row > 0).then(|| u - side),
        ];
        for v in nbrs.into_iter().flatten() {
            if dist[v] == UNSET {
                dist[v] = dist[u] + 1;
                label[v] = label[u];
                queue.push_back(v);
            } else if dist[v] == dist[u] + 1 && better(label[u], label[v]) {
                label[v] = label[u];
            }
        }
    }
    Ok(VoronoiPartition {
        level,
        window: *window,
        sites,
        site_noise,
        assignment: label,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LabelOptions {
    /// Classes with more members than this are refused.
    pub max_class_size: usize,
}

impl Default for LabelOptions {
    fn default() -> Self {
        Self { max_class_size: 64 }
    }
}

/// Labels of one class member's tree.
#[derive(Clone, Debug)]
pub struct MemberLabeling {
    pub root: Vertex,
    pub flow: TreeFlow,
    pub reference: LatticePath,
    /// The member's own cumulative flow, leaves in ccw order.
    pub cumulative: CumulativeFlow,
    /// Class-averaged values `M^i(Γ★, g]`, aligned with `cumulative.order`.
    pub averaged: Vec<f64>,
    /// `φ_i` on the edge into each flow vertex (window-indexed); zero off the flow tree.
    phi: Vec<f64>,
}

impl MemberLabeling {
    /// `φ_i(root, e)`; zero for edges not on the flow tree.
    pub fn phi(&self, e: &Edge) -> f64 {
        let (a, b) = e.endpoints();
        let t = self.flow.tree();
        for (p, c) in [(a, b), (b, a)] {
            if self.flow.carries(c) && t.parent(c) == Some(p) {
                return self.phi[t.window().index_unchecked(c)];
            }
        }
        0.0
    }

    /// `φ_i` on the edge into flow vertex `v`.
    pub fn phi_into(&self, v: Vertex) -> f64 {
        self.flow.window().index(v).map_or(0.0, |i| self.phi[i])
    }

    /// `F_i` of the leaf, equal to `φ_i` on its terminal edge.
    pub fn label(&self, leaf: Vertex) -> Option<f64> {
        self.cumulative
            .order
            .iter()
            .position(|&l| l == leaf)
            .map(|i| self.averaged[i])
    }

    /// Leaves as (leaf, mass, own cumulative value, averaged value).
    pub fn leaf_rows(&self) -> impl Iterator<Item = (Vertex, f64, f64, f64)> + '_ {
        let c = &self.cumulative;
        (0..c.order.len()).map(move |i| (c.order[i], c.mass[i], c.value[i], self.averaged[i]))
    }
}

/// Class-averaged labeling at one level.
#[derive(Clone, Debug)]
pub struct AveragedLabeling {
    pub level: u32,
    pub class_id: u32,
    pub site: Vertex,
    /// Common reference leaf of all retained members.
    pub reference_leaf: Vertex,
    pub members: Vec<MemberLabeling>,
    /// Members whose reference path does not coalesce with the common one.
    pub dropped: Vec<Vertex>,
}

impl AveragedLabeling {
    pub fn member(&self, root: Vertex) -> Option<&MemberLabeling> {
        self.members.iter().find(|m| m.root == root)
    }

    pub fn window(&self) -> &Window {
        self.members[0].flow.window()
    }

    /// Counterclockwise boundary position relative to the reference leaf.
    pub fn relative_position(&self, leaf: Vertex) -> Option<usize> {
        relative_position(self.window(), self.reference_leaf, leaf)
    }

    /// Largest label gap between member leaves that coincide (paths from
    /// different roots coalescing into the same boundary leaf).
    pub fn coalescence_discrepancy(&self) -> f64 {
        let mut by_leaf: HashMap<Vertex, (f64, f64)> = HashMap::new();
        for m in &self.members {
            for (leaf, _, _, f) in m.leaf_rows() {
                let e = by_leaf.entry(leaf).or_insert((f, f));
                e.0 = e.0.min(f);
                e.1 = e.1.max(f);
            }
        }
        by_leaf.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max)
    }
}

pub fn relative_position(window: &Window, reference_leaf: Vertex, leaf: Vertex) -> Option<usize> {
    let p = window.boundary_position(leaf)?;
    let r = window.boundary_position(reference_leaf)?;
    Some((p + window.perimeter() - r) % window.perimeter())
}

/// `M_u(Γ★, g]` as a function of the ccw boundary position of g:
/// the supremum of u's own cumulative values over its leaves at or before
/// that position. Position 0 (the reference) maps to 1.
struct PositionProfile {
    positions: Vec<usize>,
    prefix_sup: Vec<f64>,
}

impl PositionProfile {
    fn new(window: &Window, reference_leaf: Vertex, cumulative: &CumulativeFlow) -> Self {
        let mut pts: Vec<(usize, f64)> = cumulative
            .order
            .iter()
            .zip(&cumulative.value)
            .skip(1)
            .map(|(&l, &v)| (relative_position(window, reference_leaf, l).expect("leaves lie on the boundary"), v))
            .collect();
        pts.sort_by_key(|p| p.0);
        let mut prefix_sup = Vec::with_capacity(pts.len());
        let mut best: f64 = 0.0;
        for &(_, v) in &pts {
            best = best.max(v);
            prefix_sup.push(best);
        }
        Self {
            positions: pts.into_iter().map(|p| p.0).collect(),
            prefix_sup,
        }
    }

    fn at(&self, position: usize) -> f64 {
        if position == 0 {
            return 1.0;
        }
        let k = self.positions.partition_point(|&p| p <= position);
        if k == 0 {
            0.0
        } else {
            self.prefix_sup[k - 1]
        }
    }
}

struct MemberTree {
    root: Vertex,
    flow: TreeFlow,
    reference: LatticePath,
}

/// Class-averaged cumulative flows `M^i`, encodings `φ_i` and labels `F_i`
/// for every member of `class` whose reference path coalesces with the
/// class's common reference.
///
/// Every member uses the tree path to the flow leaf nearest the east
/// boundary point on the site's row. The most common such leaf (ties to
/// the smaller boundary position) is the class reference; members reaching
/// a different leaf, or arriving at it through a different final edge, are
/// dropped.
pub fn averaged_labels<W: EdgeWeights>(
    weights: &W,
    partition: &VoronoiPartition,
    class: u32,
    window: &Window,
    options: &LabelOptions,
) -> Result<AveragedLabeling> {
    let site = *partition
        .sites()
        .get(class as usize)
        .ok_or_else(|| FppError::Domain(format!("class {class} does not exist")))?;
    let members = partition.members(class);
    if members.len() > options.max_class_size {
        return Err(FppError::CostGuard(format!(
            "class {class} has {} members, cap is {}",
            members.len(),
            options.max_class_size
        )));
    }
    if let Some(v) = members.iter().find(|v| !window.contains(**v)) {
        return Err(FppError::Bounds(format!("class member {v} outside the labeling window")));
    }
    let target = Vertex::new(window.center().x + window.half_width() as i32, site.y);

    let trees: Vec<MemberTree> = members
        .par_iter()
        .map(|&root| {
            let tree = shortest_path_tree(weights, root, window)?;
            let flow = unit_flow(&tree)?;
            let reference = flow.tree().path_to(nearest_leaf(&flow, target))?;
            Ok(MemberTree { root, flow, reference })
        })
        .collect::<Result<_>>()?;

    let mut counts: HashMap<Vertex, usize> = HashMap::new();
    for t in &trees {
        *counts.entry(t.reference.end()).or_default() += 1;
    }
    let reference_leaf = *counts
        .iter()
        .max_by_key(|(leaf, &c)| (c, std::cmp::Reverse(window.boundary_position(**leaf))))
        .map(|(leaf, _)| leaf)
        .expect("classes are nonempty");
    let final_edge = |p: &LatticePath| {
        let v = p.vertices();
        (v.len() >= 2).then(|| v[v.len() - 2])
    };
    let common_final = trees
        .iter()
        .find(|t| t.reference.end() == reference_leaf)
        .and_then(|t| final_edge(&t.reference));

    let (kept, dropped): (Vec<MemberTree>, Vec<MemberTree>) = trees.into_iter().partition(|t| {
        t.reference.end() == reference_leaf && (t.reference.len() == 0 || final_edge(&t.reference) == common_final)
    });
    let dropped: Vec<Vertex> = dropped.into_iter().map(|t| t.root).collect();

    let members = label_members(
        window,
        kept.into_iter().map(|t| (t.flow, t.reference)).collect(),
    )?;

    Ok(AveragedLabeling {
        level: partition.level(),
        class_id: class,
        site,
        reference_leaf,
        members,
        dropped,
    })
}

/// Averages the cumulative flows of trees whose references all end at the
/// same leaf, and derives `φ` and the leaf labels for each of them.
pub fn label_members(window: &Window, members: Vec<(TreeFlow, LatticePath)>) -> Result<Vec<MemberLabeling>> {
    let Some(reference_leaf) = members.first().map(|m| m.1.end()) else {
        return Err(FppError::Domain("no members to label".into()));
    };
    if let Some((_, r)) = members.iter().find(|m| m.1.end() != reference_leaf) {
        return Err(FppError::Domain(format!(
            "references end at {} and {}",
            reference_leaf,
            r.end()
        )));
    }
    let cumulative: Vec<CumulativeFlow> = members
        .par_iter()
        .map(|(flow, reference)| cumulative_flow(flow, reference))
        .collect::<Result<_>>()?;
    let profiles: Vec<PositionProfile> = cumulative
        .iter()
        .map(|c| PositionProfile::new(window, reference_leaf, c))
        .collect();
    let count = profiles.len() as f64;

    Ok(members
        .into_iter()
        .zip(cumulative)
        .map(|((flow, reference), cum)| {
            let averaged: Vec<f64> = cum
                .order
                .iter()
                .map(|&leaf| {
                    let pos = relative_position(window, reference_leaf, leaf).expect("boundary leaf");
                    profiles.iter().map(|p| p.at(pos)).sum::<f64>() / count
                })
                .collect();
            let phi = encode_phi(&flow, &cum, &averaged);
            MemberLabeling {
                root: flow.root(),
                flow,
                reference,
                cumulative: cum,
                averaged,
                phi,
            }
        })
        .collect())

}

/// `φ(v, e) = sup {M(g) : g uses e}` on the edge into every flow vertex.
fn encode_phi(flow: &TreeFlow, cumulative: &CumulativeFlow, values: &[f64]) -> Vec<f64> {
    let w = *flow.window();
    let mut phi = vec![0.0; w.len()];
    for (leaf, &v) in cumulative.order.iter().zip(values) {
        phi[w.index_unchecked(*leaf)] = v;
    }
    for &v in flow.tree().order().iter().rev() {
        let v = v as usize;
        if !flow.kept[v] {
            continue;
        }
        let kids = flow.children_of(v);
        if !kids.is_empty() {
            phi[v] = kids.iter().map(|&c| phi[c as usize]).fold(0.0, f64::max);
        }
    }
    phi
}

/// `F_i` of a root-to-leaf path: the minimum of `φ_i` over its edges.
pub fn label_of_path(labeling: &AveragedLabeling, path: &LatticePath) -> Result<f64> {
    let member = labeling
        .member(path.root())
        .ok_or_else(|| FppError::Domain(format!("{} is not a labeled root", path.root())))?;
    if !member.flow.is_leaf(path.end()) || member.flow.tree().path_to(path.end())? != *path {
        return Err(FppError::Domain("path is not a root-to-leaf path of the labeled tree".into()));
    }
    if path.is_empty() {
        return member
            .label(path.end())
            .ok_or_else(|| FppError::Internal("single-vertex leaf without a label".into()));
    }
    Ok(path
        .vertices()
        .iter()
        .skip(1)
        .map(|&v| member.phi_into(v))
        .fold(f64::INFINITY, f64::min))
}

/// Label drift `|F_{i+1}(g) - F_i(g)|` over the leaves of `root`'s tree,
/// using the classes containing `root` at both levels.
pub fn label_drift<W: EdgeWeights>(
    weights: &W,
    noise: &VertexNoise,
    root: Vertex,
    level: u32,
    window: &Window,
    options: &LabelOptions,
) -> Result<Vec<(Vertex, f64, f64)>> {
    let mut labels = Vec::with_capacity(2);
    for lv in [level, level + 1] {
        let part = voronoi_partition(noise, lv, window)?;
        let class = part
            .class_of(root)
            .ok_or_else(|| FppError::Bounds(format!("{root} outside window")))?;
        let lab = averaged_labels(weights, &part, class, window, options)?;
        let m = lab
            .member(root)
            .ok_or_else(|| FppError::Degenerate(format!("{root} dropped from its level-{lv} class")))?;
        labels.push(m.leaf_rows().map(|(leaf, _, _, f)| (leaf, f)).collect::<HashMap<_, _>>());
    }
    let mut rows: Vec<(Vertex, f64, f64)> = labels[0]
        .iter()
        .filter_map(|(leaf, &a)| labels[1].get(leaf).map(|&b| (*leaf, a, b)))
        .collect();
    rows.sort_by_key(|r| window.boundary_position(r.0));
    Ok(rows)
}
