//! First-passage percolation on the Z² nearest-neighbour lattice.
//!
//! Seed-keyed edge-weight fields, exact geodesic trees on finite windows,
//! finite-horizon Busemann estimators, flow-based geodesic labelings, and a
//! deterministic Monte Carlo harness for shape, midpoint, coalescence and
//! scaling-exponent experiments.

pub mod busemann;
pub mod error;
pub mod experiments;
pub mod labeling;
pub mod lattice;
pub mod metric;
pub mod stats;
pub mod weights;

pub use error::{FppError, Result};
pub use lattice::{ccw_compare, edge_id, neighbors, Direction, Edge, EdgeId, HalfPlane, LatticePath, Vertex, Window};
pub use metric::{geodesic, halfplane_tree, shortest_path_tree, GeodesicSegment, GeodesicTree, RestrictedField};
pub use weights::{derive_trial_seed, EdgeWeightField, EdgeWeights, VertexNoise, WeightDistribution};
