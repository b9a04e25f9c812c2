//! SVG output for geodesic trees, flows and labels.

use std::fmt::Write;

use fpp_core::labeling::TreeFlow;
use fpp_core::lattice::{LatticePath, Vertex, Window};
use fpp_core::metric::GeodesicTree;

use crate::config::RenderOptions;

/// Provenance written into every document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

/// Stroke width of an unweighted tree edge, before `stroke_scale`.
pub const BASE_STROKE: f64 = 0.15;
/// Stroke width of an edge carrying the whole unit of mass.
pub const FULL_MASS_STROKE: f64 = 0.8;

fn open(out: &mut String, window: &Window, header: &Header) {
    let hw = window.half_width() as i64;
    let c = window.center();
    let side = 2 * hw + 2;
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        "<!-- fpp command={} seed={} config={} -->",
        header.command, header.seed, header.config_hash
    );
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        c.x as i64 - hw - 1,
        -(c.y as i64) - hw - 1,
        side,
        side
    );
}

fn point(v: Vertex) -> String {
    // SVG's y axis points down.
    format!("{:.3},{:.3}", v.x as f64, -(v.y as f64))
}

fn polyline(out: &mut String, pts: &[Vertex], color: &str, width: f64) {
    let pts: Vec<String> = pts.iter().map(|&v| point(v)).collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width:.3}" stroke-linecap="round"/>"#,
        pts.join(" ")
    );
}

/// One polyline per tree edge in settle order. With a flow, only edges
/// carrying mass are drawn and their width is proportional to it; with
/// labels, each listed leaf is annotated with its value to 4 decimals.
pub fn render_tree(
    tree: &GeodesicTree,
    flow: Option<&TreeFlow>,
    labels: Option<&[(Vertex, f64)]>,
    options: &RenderOptions,
    header: &Header,
) -> String {
    let window = tree.window();
    let mut out = String::new();
    open(&mut out, window, header);
    let color = options.palette.stroke();
    for &idx in tree.order() {
        let Some(p) = tree.parent_index(idx as usize) else { continue };
        let (v, u) = (window.vertex(idx as usize), window.vertex(p));
        let width = match flow {
            Some(f) => {
                if !f.carries(v) {
                    continue;
                }
                options.stroke_scale * FULL_MASS_STROKE * f.mass_into(v)
            }
            None => options.stroke_scale * BASE_STROKE,
        };
        polyline(&mut out, &[u, v], color, width);
    }
    if let Some(labels) = labels {
        let size = 1.2 * options.stroke_scale;
        for &(leaf, f) in labels {
            let _ = writeln!(
                out,
                r#"<text x="{:.3}" y="{:.3}" font-size="{size:.3}" fill="{}">{f:.4}</text>"#,
                leaf.x as f64 + 0.3,
                -(leaf.y as f64) - 0.3,
                options.palette.accent()
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// The tree in thin strokes with one highlighted geodesic on top.
pub fn render_geodesic(tree: &GeodesicTree, path: &LatticePath, options: &RenderOptions, header: &Header) -> String {
    let mut doc = render_tree(tree, None, None, options, header);
    doc.truncate(doc.len() - "</svg>\n".len());
    polyline(
        &mut doc,
        path.vertices(),
        options.palette.accent(),
        options.stroke_scale * FULL_MASS_STROKE * 0.5,
    );
    doc.push_str("</svg>\n");
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use fpp_core::labeling::unit_flow;
    use fpp_core::lattice::Edge;
    use fpp_core::metric::{shortest_path_tree, NO_PARENT};
    use fpp_core::weights::{EdgeWeights, EdgeWeightField, WeightDistribution};
    use fpp_core::EdgeId;

    fn header() -> Header {
        Header {
            command: "render".into(),
            seed: 5,
            config_hash: "abc123".into(),
        }
    }

    fn widths(svg: &str) -> Vec<f64> {
        svg.lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| {
                let w = l.split("stroke-width=\"").nth(1).unwrap();
                w[..w.find('"').unwrap()].parse().unwrap()
            })
            .collect()
    }

    #[test]
    fn single_edge_tree_has_one_polyline() {
        let w = Window::new(Vertex::ORIGIN, 1).unwrap();
        let mut dist = vec![f64::INFINITY; w.len()];
        let mut parent = vec![NO_PARENT; w.len()];
        let root = w.index(Vertex::ORIGIN).unwrap();
        let east = w.index(Vertex::new(1, 0)).unwrap();
        dist[root] = 0.0;
        dist[east] = 1.0;
        // Direction index of the step back from (1,0) to the origin.
        parent[east] = Vertex::new(1, 0).direction_to(Vertex::ORIGIN).unwrap() as u8;
        let tree = GeodesicTree::from_parts(Vertex::ORIGIN, w, dist, parent).unwrap();
        let svg = render_tree(&tree, None, None, &RenderOptions::default(), &header());
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<line").count(), 0);
        assert!(svg.contains("seed=5 config=abc123"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let w = Window::new(Vertex::ORIGIN, 6).unwrap();
        let f = EdgeWeightField::new(3, WeightDistribution::Exponential { rate: 1.0 }).unwrap();
        let tree = shortest_path_tree(&f, Vertex::ORIGIN, &w).unwrap();
        let flow = unit_flow(&tree).unwrap();
        let opts = RenderOptions::default();
        let a = render_tree(&tree, Some(&flow), Some(&[(Vertex::new(6, 0), 0.5)]), &opts, &header());
        let b = render_tree(&tree, Some(&flow), Some(&[(Vertex::new(6, 0), 0.5)]), &opts, &header());
        assert_eq!(a, b);
        assert!(a.contains(">0.5000</text>"));
        assert_eq!(a.matches("<polyline").count(), flow.edges().count());
    }

    /// Cross of radius 1 in a half-width-1 window: the root has three
    /// boundary children and the fourth arm is blocked.
    struct Cross;

    impl EdgeWeights for Cross {
        fn weight_of(&self, e: &Edge, _: EdgeId) -> f64 {
            let (a, b) = e.endpoints();
            if a == Vertex::ORIGIN || b == Vertex::ORIGIN {
                if a == Vertex::new(-1, 0) || b == Vertex::new(-1, 0) {
                    f64::INFINITY
                } else {
                    1.0
                }
            } else {
                10.0
            }
        }
    }

    #[test]
    fn three_way_split_has_equal_terminal_strokes() {
        let w = Window::new(Vertex::ORIGIN, 1).unwrap();
        let tree = shortest_path_tree(&Cross, Vertex::ORIGIN, &w).unwrap();
        let flow = unit_flow(&tree).unwrap();
        assert_eq!(flow.leaves().len(), 3);
        let svg = render_tree(&tree, Some(&flow), None, &RenderOptions::default(), &header());
        let ws = widths(&svg);
        assert_eq!(ws.len(), 3);
        assert!(ws.iter().all(|&x| x == ws[0]));
        assert_eq!(ws[0], (FULL_MASS_STROKE / 3.0 * 1000.0).round() / 1000.0);
    }
}
