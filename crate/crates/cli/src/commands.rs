//! One function per command; each fills an [`Artifacts`] set.

use fpp_core::busemann::{default_rings, fit_per_horizon, probe_offsets, AnchorTrees, RayApproximation};
use fpp_core::experiments::{
    coalescence_study, direction_grid, estimate_shape, extended_shape_check, midpoint_exponent, midpoint_probability,
    run_trials, scaling_samples, ExperimentSettings, Observable,
};
use fpp_core::labeling::{
    averaged_labels, east_reference, label_drift, label_members, unit_flow, voronoi_partition, LabelOptions,
};
use fpp_core::lattice::{policy_half_width, Vertex, Window};
use fpp_core::metric::{partial_tree, shortest_path_tree};
use fpp_core::weights::{derive_trial_seed, EdgeWeightField, VertexNoise};
use fpp_core::{FppError, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::output::{num, vtx, Artifacts};
use crate::render::{render_geodesic, render_tree};

/// Tolerance, in standard errors, for the symmetry and subadditivity verdicts.
pub const SE_TOLERANCE: f64 = 2.0;

fn settings(c: &RunConfig) -> ExperimentSettings {
    ExperimentSettings::new(c.distribution, c.seed, c.trials.expect("resolved")).with_threads(c.threads)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

/// Runs the command of a resolved config; returns the `results` object of
/// the summary.
pub fn dispatch(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    match c.command {
        Command::Shape => shape(c, out),
        Command::Midpoint => midpoint(c, out),
        Command::Busemann => busemann(c, out),
        Command::Labels => labels(c, out),
        Command::Coalesce => coalesce(c, out),
        Command::Exponents => exponents(c, out),
        Command::Geodesic => geodesic(c, out),
        Command::Render => render(c, out),
    }
}

fn shape(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let s = settings(c);
    let radii = c.radii.clone().expect("resolved");
    let angles = direction_grid(c.directions.expect("resolved"));
    let est = estimate_shape(&s, &radii, &angles, c.window)?;
    out.csv(
        "shape.csv",
        &["angle", "radius", "target_x", "target_y", "mean_time", "se_time", "mu", "mu_se"],
        est.cells.iter().map(|cell| {
            vec![
                num(cell.angle),
                num(cell.radius),
                cell.target.x.to_string(),
                cell.target.y.to_string(),
                num(cell.mean_time),
                num(cell.se_time),
                num(cell.mu),
                num(cell.mu_se),
            ]
        }),
    );
    let mut results = json!({
        "angles": est.angles,
        "mu_hat": est.mu_hat,
        "mu_se": est.mu_se,
        "symmetry": to_value(&est.symmetry(SE_TOLERANCE)),
        "subadditivity": to_value(&est.subadditivity(SE_TOLERANCE)),
    });
    if let Some(eps) = c.epsilon {
        let offsets = c.offsets.clone().expect("resolved");
        let report = extended_shape_check(&s, eps, &radii, &offsets, |y| est.mu_of(y))?;
        out.csv(
            "extended_shape.csv",
            &["inner_radius", "violation_fraction", "se", "pairs_per_trial"],
            report.rows.iter().map(|r| {
                vec![num(r.inner_radius), num(r.violation_fraction), num(r.se), r.pairs_per_trial.to_string()]
            }),
        );
        results["extended_shape"] = to_value(&report);
    }
    Ok(results)
}

fn midpoint(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let sizes = c.sizes.clone().expect("resolved");
    let curve = midpoint_probability(&settings(c), &sizes)?;
    out.csv(
        "midpoint.csv",
        &["k", "trials", "hits", "p_hat", "se", "ci_low", "ci_high"],
        curve.points.iter().map(|p| {
            vec![
                p.k.to_string(),
                p.trials.to_string(),
                p.hits.to_string(),
                num(p.p_hat),
                num(p.se),
                num(p.ci_low),
                num(p.ci_high),
            ]
        }),
    );
    let exponent = if curve.points.len() >= 3 { Some(midpoint_exponent(&curve)?) } else { None };
    Ok(json!({ "curve": to_value(&curve), "exponent": to_value(&exponent) }))
}

struct BusemannTrial {
    rows: Vec<Vec<String>>,
    fits: Vec<Vec<String>>,
    bound_ok: bool,
    witnesses_ok: bool,
    last_gap: f64,
}

fn busemann(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let radii = c.radii.clone().expect("resolved");
    let theta = c.theta.expect("resolved");
    let root = Vertex::ORIGIN;
    let probes = probe_offsets(theta, &default_rings(radii[0]));
    let run = run_trials(c.seed, c.trials.expect("resolved"), c.threads, |_, seed| {
        let field = EdgeWeightField::new(seed, c.distribution)?;
        let ray = RayApproximation::along_geodesic(&field, root, theta, &radii)?;
        let trees = AnchorTrees::build(&field, &ray)?;
        let mut trial = BusemannTrial {
            rows: Vec::new(),
            fits: Vec::new(),
            bound_ok: true,
            witnesses_ok: true,
            last_gap: 0.0,
        };
        let mut gap = 0.0f64;
        for z in &probes {
            let y = Vertex::new(root.x + z.x, root.y + z.y);
            let est = trees.estimate(&field, root, y)?;
            trial.bound_ok &= est.bound_excess() <= 1e-9;
            trial.witnesses_ok &= est.witnesses_monotone().unwrap_or(false);
            gap = gap.max(est.last_gap());
            for (k, ((b, g), t)) in est.values.iter().zip(est.gaps()).zip(&est.bound).enumerate() {
                trial.rows.push(vec![
                    seed.to_string(),
                    vtx(root),
                    vtx(y),
                    (k + 1).to_string(),
                    num(radii[k]),
                    vtx(ray.anchors()[k]),
                    num(*b),
                    num(g),
                    num(*t),
                ]);
            }
        }
        trial.last_gap = gap;
        for (k, fit) in fit_per_horizon(&trees, &probes)?.iter().enumerate() {
            trial.fits.push(vec![
                seed.to_string(),
                (k + 1).to_string(),
                num(radii[k]),
                num(fit.a),
                num(fit.b),
                num(fit.residual),
                num(fit.at_angle(theta)),
            ]);
        }
        Ok(trial)
    })?;
    out.csv(
        "busemann.csv",
        &["seed", "x", "y", "k", "r_k", "anchor", "b_k", "gap", "bound_t"],
        run.outputs.iter().flat_map(|t| t.rows.clone()),
    );
    out.csv(
        "fits.csv",
        &["seed", "k", "r_k", "a", "b", "residual", "rho_at_theta"],
        run.outputs.iter().flat_map(|t| t.fits.clone()),
    );
    Ok(json!({
        "trial_seeds": run.seeds,
        "probes": probes.iter().map(|&v| vtx(v)).collect::<Vec<_>>(),
        "bound_holds": run.outputs.iter().all(|t| t.bound_ok),
        "witnesses_monotone": run.outputs.iter().all(|t| t.witnesses_ok),
        "max_last_gap": run.outputs.iter().map(|t| t.last_gap).fold(0.0, f64::max),
    }))
}

enum LabelTrial {
    Done {
        rows: Vec<Vec<String>>,
        drift: Vec<Vec<String>>,
        members: usize,
        dropped: usize,
        discrepancy: f64,
        svg: Option<String>,
    },
    Skipped(String),
}

fn labels(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let window = Window::new(Vertex::ORIGIN, c.window.expect("resolved"))?;
    let options = LabelOptions { max_class_size: c.max_class };
    let root = Vertex::ORIGIN;
    let header = out.header.clone();
    let run = run_trials(c.seed, c.trials.expect("resolved"), c.threads, |index, seed| {
        let field = EdgeWeightField::new(seed, c.distribution)?;
        let noise = VertexNoise::new(seed);
        let part = match voronoi_partition(&noise, c.level, &window) {
            Ok(p) => p,
            Err(e @ FppError::RetryNeeded { .. }) => return Ok(LabelTrial::Skipped(e.to_string())),
            Err(e) => return Err(e),
        };
        let class = part.class_of(root).expect("root in window");
        let lab = match averaged_labels(&field, &part, class, &window, &options) {
            Ok(l) => l,
            Err(e @ FppError::CostGuard(_)) => return Ok(LabelTrial::Skipped(e.to_string())),
            Err(e) => return Err(e),
        };
        let mut rows = Vec::new();
        for m in &lab.members {
            for (leaf, mass, own, label) in m.leaf_rows() {
                rows.push(vec![
                    seed.to_string(),
                    c.level.to_string(),
                    lab.class_id.to_string(),
                    vtx(m.root),
                    vtx(leaf),
                    lab.relative_position(leaf).map_or(String::new(), |p| p.to_string()),
                    num(mass),
                    num(own),
                    num(label),
                ]);
            }
        }
        let drift = match label_drift(&field, &noise, root, c.level, &window, &options) {
            Ok(d) => d
                .into_iter()
                .map(|(leaf, a, b)| vec![seed.to_string(), vtx(leaf), num(a), num(b), num((a - b).abs())])
                .collect(),
            Err(FppError::RetryNeeded { .. } | FppError::CostGuard(_) | FppError::Degenerate(_)) => Vec::new(),
            Err(e) => return Err(e),
        };
        let svg = (index == 0)
            .then(|| lab.member(root))
            .flatten()
            .map(|m| {
                let leaf_labels: Vec<(Vertex, f64)> = m.leaf_rows().map(|(leaf, _, _, f)| (leaf, f)).collect();
                let labels = c.render.labels.then_some(leaf_labels.as_slice());
                render_tree(m.flow.tree(), Some(&m.flow), labels, &c.render, &header)
            });
        Ok(LabelTrial::Done {
            rows,
            drift,
            members: lab.members.len(),
            dropped: lab.dropped.len(),
            discrepancy: lab.coalescence_discrepancy(),
            svg,
        })
    })?;
    let mut rows = Vec::new();
    let mut drift = Vec::new();
    let mut skipped = Vec::new();
    let mut classes = Vec::new();
    for (seed, t) in run.seeds.iter().zip(run.outputs) {
        match t {
            LabelTrial::Done {
                rows: r,
                drift: d,
                members,
                dropped,
                discrepancy,
                svg,
            } => {
                rows.extend(r);
                drift.extend(d);
                classes.push(json!({"seed": seed, "members": members, "dropped": dropped, "discrepancy": discrepancy}));
                if let Some(svg) = svg {
                    out.text("labels.svg", svg);
                }
            }
            LabelTrial::Skipped(reason) => skipped.push(json!({"seed": seed, "reason": reason})),
        }
    }
    out.csv(
        "labels.csv",
        &["seed", "level", "class_id", "root", "leaf", "position", "mass", "cumulative", "label"],
        rows,
    );
    out.csv("drift.csv", &["seed", "leaf", "label", "label_next_level", "drift"], drift);
    Ok(json!({
        "trial_seeds": run.seeds,
        "classes": classes,
        "skipped": skipped,
        "caveat": "cross-member order is read off window-boundary positions; paths that would separate only outside the window can be misordered",
    }))
}

fn coalesce(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let seps = c.separations.clone().expect("resolved");
    let stats = coalescence_study(&settings(c), &seps, c.target_radius.expect("resolved"))?;
    out.csv(
        "coalesce.csv",
        &["separation", "q25", "median", "q75", "max"],
        stats.per_separation.iter().map(|s| {
            vec![s.separation.to_string(), num(s.q25), num(s.median), num(s.q75), num(s.max)]
        }),
    );
    out.csv(
        "merge_radii.csv",
        &["separation", "trial", "merge_radius"],
        stats.per_separation.iter().flat_map(|s| {
            s.merge_radii
                .iter()
                .enumerate()
                .map(|(t, r)| vec![s.separation.to_string(), t.to_string(), num(*r)])
                .collect::<Vec<_>>()
        }),
    );
    Ok(json!({
        "target_radius": stats.target_radius,
        "median_nondecreasing": stats.median_nondecreasing,
        "bounded": stats.bounded,
        "medians": stats.per_separation.iter().map(|s| s.median).collect::<Vec<_>>(),
    }))
}

fn exponents(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let sizes = c.sizes.clone().expect("resolved");
    let samples = scaling_samples(&settings(c), &sizes)?;
    let fits = [samples.fit(Observable::Chi)?, samples.fit(Observable::Xi)?];
    out.csv(
        "exponents.csv",
        &["observable", "size", "statistic", "se"],
        fits.iter().flat_map(|f| {
            f.sizes
                .iter()
                .zip(f.statistic.iter().zip(&f.statistic_se))
                .map(|(n, (s, se))| vec![f.observable.name().to_string(), n.to_string(), num(*s), num(*se)])
                .collect::<Vec<_>>()
        }),
    );
    Ok(json!({
        "chi": to_value(&fits[0]),
        "xi": to_value(&fits[1]),
    }))
}

fn geodesic(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let (a, b) = (c.from.expect("resolved"), c.to.expect("resolved"));
    let (from, to) = (Vertex::new(a.0, a.1), Vertex::new(b.0, b.1));
    let span = (from.x - to.x).abs().max((from.y - to.y).abs()).max(1);
    let window = Window::new(from, c.window.unwrap_or_else(|| policy_half_width(span as f64)))?;
    let seed = derive_trial_seed(c.seed, 0);
    let field = EdgeWeightField::new(seed, c.distribution)?;
    let tree = partial_tree(&field, from, &window, &[to])?;
    let path = tree.path_to(to)?;
    let weight = tree.dist(to).expect("target settled");
    out.csv(
        "geodesic.csv",
        &["step", "x", "y", "passage_time"],
        path.vertices().iter().enumerate().map(|(i, v)| {
            vec![i.to_string(), v.x.to_string(), v.y.to_string(), num(tree.dist(*v).expect("on path"))]
        }),
    );
    let record = json!({
        "master_seed": c.seed,
        "config_hash": out.header.config_hash,
        "seed": seed,
        "from": vtx(from),
        "to": vtx(to),
        "passage_time": weight,
        "edges": path.len(),
        "vertices": path.vertices().iter().map(|&v| vtx(v)).collect::<Vec<_>>(),
    });
    out.json("geodesic.json", &record);
    out.text("geodesic.svg", render_geodesic(&tree, &path, &c.render, &out.header));
    Ok(json!({ "seed": seed, "passage_time": weight, "edges": path.len() }))
}

fn render(c: &RunConfig, out: &mut Artifacts) -> Result<Value> {
    let window = Window::new(Vertex::ORIGIN, c.window.expect("resolved"))?;
    let seed = derive_trial_seed(c.seed, 0);
    let field = EdgeWeightField::new(seed, c.distribution)?;
    let tree = shortest_path_tree(&field, Vertex::ORIGIN, &window)?;
    let flow = unit_flow(&tree)?;
    let reference = east_reference(&flow)?;
    let member = label_members(&window, vec![(flow.clone(), reference)])?.remove(0);
    let labels: Vec<(Vertex, f64)> = member.leaf_rows().map(|(leaf, _, _, f)| (leaf, f)).collect();
    out.text("tree.svg", render_tree(&tree, None, None, &c.render, &out.header));
    out.text(
        "flow.svg",
        render_tree(&tree, Some(&flow), c.render.labels.then_some(labels.as_slice()), &c.render, &out.header),
    );
    Ok(json!({
        "seed": seed,
        "leaves": labels.len(),
        "reference_leaf": vtx(member.cumulative.reference_leaf()),
        "conservation_error": flow.conservation_error(),
    }))
}
