use fpp_core::labeling::{ccw_leaf_order, cumulative_flow, east_reference, unit_flow, voronoi_partition, site_threshold};
use fpp_core::lattice::{ccw_compare, Edge, EdgeId, LatticePath, Vertex, Window};
use fpp_core::metric::{geodesic, shortest_path_tree};
use fpp_core::weights::{fmix, EdgeWeightField, EdgeWeights, VertexNoise, WeightDistribution};
use fpp_testkit::{bellman_ford, boundary_sweep, brute_voronoi, enumerate_paths, winding_compare};
use proptest::prelude::*;

fn exp_field(seed: u64) -> EdgeWeightField {
    EdgeWeightField::new(seed, WeightDistribution::Exponential { rate: 1.0 }).unwrap()
}

/// Vertex of `w` picked by hashing `(seed, salt)`.
fn pick(w: &Window, seed: u64, salt: u64) -> Vertex {
    w.vertex((fmix(seed ^ fmix(salt)) % w.len() as u64) as usize)
}

/// The 6×6 box `[-3, 2]²`, realised as a 7×7 window whose top row and
/// right column are cut off.
struct SixBySix(EdgeWeightField);

impl EdgeWeights for SixBySix {
    fn weight_of(&self, e: &Edge, id: EdgeId) -> f64 {
        let (a, b) = e.endpoints();
        if a.x == 3 || b.x == 3 || a.y == 3 || b.y == 3 {
            f64::INFINITY
        } else {
            self.0.weight_of(e, id)
        }
    }
}

#[test]
fn dijkstra_matches_bellman_ford_bit_exactly() {
    let w = Window::new(Vertex::ORIGIN, 3).unwrap();
    for seed in 0..100 {
        let f = exp_field(seed);
        let src = pick(&w, seed, 1);
        let tree = shortest_path_tree(&f, src, &w).unwrap();
        let (dist, parent) = bellman_ford(&f, src, &w);
        for (i, v) in w.vertices().enumerate() {
            assert_eq!(tree.dist_at(i).to_bits(), dist[i].to_bits(), "seed {seed} at {v}");
            assert_eq!(tree.parent(v), parent[i], "seed {seed} at {v}");
        }
    }
}

#[test]
fn unit_weights_match_bellman_ford_tie_break() {
    let w = Window::new(Vertex::ORIGIN, 3).unwrap();
    let f = EdgeWeightField::new(0, WeightDistribution::ConstantOne).unwrap();
    for src in w.vertices() {
        let tree = shortest_path_tree(&f, src, &w).unwrap();
        let (dist, parent) = bellman_ford(&f, src, &w);
        for (i, v) in w.vertices().enumerate() {
            assert_eq!(tree.dist_at(i), dist[i]);
            assert_eq!(tree.parent(v), parent[i]);
        }
    }
}

#[test]
fn geodesic_is_unique_exhaustive_minimizer_on_6x6() {
    let w = Window::new(Vertex::ORIGIN, 3).unwrap();
    let boxed: Vec<Vertex> = w.vertices().filter(|v| v.x < 3 && v.y < 3).collect();
    let mut checked = 0;
    for seed in 0..500u64 {
        if checked == 50 {
            break;
        }
        let f = SixBySix(exp_field(seed));
        let x = boxed[(fmix(seed) % 36) as usize];
        let y = boxed[(fmix(seed ^ 0xabc) % 36) as usize];
        if x == y {
            continue;
        }
        let geo = geodesic(&f, x, y, &w).unwrap();
        assert!(geo.path.vertices().iter().all(|v| v.x < 3 && v.y < 3));
        if geo.path.len() > 14 {
            continue;
        }
        let en = enumerate_paths(&f, x, y, &w, 14);
        assert_eq!(en.best_weight.to_bits(), geo.weight.to_bits(), "seed {seed}");
        assert_eq!(en.minimizers, 1, "seed {seed}");
        assert_eq!(en.best_path, geo.path.vertices(), "seed {seed}");
        checked += 1;
    }
    assert_eq!(checked, 50);
}

#[test]
fn tree_ccw_order_matches_oracles() {
    let w = Window::new(Vertex::ORIGIN, 16).unwrap();
    let mut big = 0;
    for seed in 0..20 {
        let f = exp_field(seed);
        let root = Vertex::new((seed as i32 % 7) - 3, (seed as i32 % 5) - 2);
        let tree = shortest_path_tree(&f, root, &w).unwrap();
        let flow = unit_flow(&tree).unwrap();
        let reference = east_reference(&flow).unwrap();
        let order = ccw_leaf_order(&flow, &reference).unwrap();
        big += (order.len() >= 50) as u32;

        assert_eq!(order, boundary_sweep(&w, reference.end(), &flow.leaves()), "seed {seed}");

        let paths: Vec<LatticePath> = order.iter().map(|&l| tree.path_to(l).unwrap()).collect();
        for i in 0..paths.len() {
            for j in 0..paths.len() {
                let lib = ccw_compare(&paths[i], &paths[j], &reference).unwrap();
                assert_eq!(lib, i.cmp(&j), "seed {seed}: leaves {} and {}", order[i], order[j]);
                assert_eq!(winding_compare(&paths[i], &paths[j], &reference), lib);
            }
        }
    }
    assert!(big >= 5, "only {big} trees had 50 leaves");
}

#[test]
fn cumulative_flow_on_thousand_leaf_tree() {
    let w = Window::new(Vertex::ORIGIN, 320).unwrap();
    let tree = shortest_path_tree(&exp_field(77), Vertex::ORIGIN, &w).unwrap();
    let flow = unit_flow(&tree).unwrap();
    assert!(flow.leaves().len() >= 1000, "{} leaves", flow.leaves().len());
    assert!(flow.conservation_error() <= 1e-9);
    let cum = cumulative_flow(&flow, &east_reference(&flow).unwrap()).unwrap();
    assert_eq!(cum.value[0], 1.0);
    assert!(cum.value[1..].windows(2).all(|p| p[0] <= p[1]));
    // The reference is also the ccw-maximal element: the last other leaf
    // reaches 1 once the reference's own mass is added.
    assert!((cum.value.last().unwrap() + cum.mass[0] - 1.0).abs() < 1e-9);
}

#[test]
fn voronoi_matches_brute_force_scan() {
    let w = Window::new(Vertex::new(3, -2), 24).unwrap();
    for seed in 0..12 {
        let noise = VertexNoise::new(seed);
        for level in 1..=3 {
            let brute = brute_voronoi(&noise, site_threshold(level), &w);
            match voronoi_partition(&noise, level, &w) {
                Ok(p) => {
                    let brute = brute.unwrap();
                    for (i, v) in w.vertices().enumerate() {
                        assert_eq!(p.site_of(v), Some(brute[i]), "seed {seed} level {level} at {v}");
                    }
                    let again = voronoi_partition(&noise, level, &w).unwrap();
                    assert_eq!(again.assignment(), p.assignment());
                }
                Err(_) => assert!(brute.is_none()),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn passage_times_form_a_metric(seed in any::<u64>(), a in 0usize..225, b in 0usize..225, c in 0usize..225) {
        let w = Window::new(Vertex::ORIGIN, 7).unwrap();
        let f = exp_field(seed);
        let (x, y, z) = (w.vertex(a), w.vertex(b), w.vertex(c));
        let tx = shortest_path_tree(&f, x, &w).unwrap();
        let ty = shortest_path_tree(&f, y, &w).unwrap();
        let txy = tx.dist(y).unwrap();
        prop_assert_eq!(txy, ty.dist(x).unwrap());
        prop_assert!(tx.dist(z).unwrap() <= txy + ty.dist(z).unwrap());
        prop_assert_eq!(txy == 0.0, x == y);
    }

    #[test]
    fn tree_paths_are_geodesic_segments(seed in any::<u64>(), a in 0usize..81) {
        let w = Window::new(Vertex::ORIGIN, 4).unwrap();
        let f = exp_field(seed);
        let tree = shortest_path_tree(&f, Vertex::ORIGIN, &w).unwrap();
        tree.verify(&f).unwrap();
        let path = tree.path_to(w.vertex(a)).unwrap();
        prop_assert!(path.is_self_avoiding());
        // Every subpath is itself a geodesic.
        let vs = path.vertices();
        if vs.len() > 2 {
            let sub = geodesic(&f, vs[1], *vs.last().unwrap(), &w).unwrap();
            prop_assert_eq!(sub.path.vertices(), &vs[1..]);
        }
    }
}
