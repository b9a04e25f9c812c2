//! Seed-keyed random environments.
//!
//! Every value is a pure function of `(seed, key)`: there is no sequential
//! generator state, so a field gives bit-identical answers in any window,
//! any query order and on any thread.
//!
//! # Stream layout
//!
//! The mixer is the SplitMix64 finalizer `fmix`:
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//! z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//! z =  z ^ (z >> 31)
//! ```
//!
//! A draw for key `k` (an [`EdgeId`] or a [`Vertex::code`]) at attempt
//! `c` is
//!
//! ```text
//! h = fmix(fmix(fmix(seed ^ DOMAIN) ^ k) ^ (c * 0x9e3779b97f4a7c15))
//! u = (h >> 11) * 2^-53                      in [0, 1)
//! ```
//!
//! with `DOMAIN` = [`EDGE_DOMAIN`] for edge weights and [`VERTEX_DOMAIN`]
//! for vertex noise. Edge weights are transformed by inverse CDF
//! (exponential, uniform) or by `rand_distr::Gamma` driven by the same
//! counter stream, then rounded to the dyadic grid `2^-32`. A weight that
//! rounds to zero is redrawn at `c + 1`.
//!
//! The dyadic grid makes every path sum below `2^21` exact in `f64`, so
//! passage times do not depend on summation order.

use std::fmt;
use std::str::FromStr;

use rand_core::RngCore;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{FppError, Result};
use crate::lattice::{edge_id_unchecked, Edge, EdgeId, Vertex};

pub const EDGE_DOMAIN: u64 = 0x6a09_e667_f3bc_c908;
pub const VERTEX_DOMAIN: u64 = 0xbb67_ae85_84ca_a73b;
pub const TRIAL_DOMAIN: u64 = 0x3c6e_f372_fe94_f82b;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Weights are multiples of `2^-WEIGHT_GRID_BITS`.
pub const WEIGHT_GRID_BITS: i32 = 32;

#[inline]
pub fn fmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn stream_key(seed: u64, domain: u64) -> u64 {
    fmix(seed ^ domain)
}

#[inline]
fn draw(key: u64, id: u64, counter: u64) -> u64 {
    fmix(fmix(key ^ id) ^ counter.wrapping_mul(GOLDEN))
}

#[inline]
fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn quantize(w: f64) -> f64 {
    let scale = (1u64 << WEIGHT_GRID_BITS) as f64;
    (w * scale).round() / scale
}

/// Counter stream for one key, used to drive multi-draw samplers.
struct CounterStream {
    key: u64,
    id: u64,
    counter: u64,
}

impl RngCore for CounterStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let h = draw(self.key, self.id, self.counter);
        self.counter += 1;
        h
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Marginal law of a single edge weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightDistribution {
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
    Gamma { shape: f64, scale: f64 },
    /// Every edge has weight one. Not continuous; for tests and fixtures.
    ConstantOne,
}

impl WeightDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightDistribution::Exponential { rate } => rate.is_finite() && rate > 0.0,
            WeightDistribution::Uniform { low, high } => low.is_finite() && high.is_finite() && 0.0 <= low && low < high,
            WeightDistribution::Gamma { shape, scale } => {
                shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0
            }
            WeightDistribution::ConstantOne => true,
        };
        if ok {
            Ok(())
        } else {
            Err(FppError::Config(format!("invalid distribution parameters: {self}")))
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, WeightDistribution::ConstantOne)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            WeightDistribution::Exponential { rate } => 1.0 / rate,
            WeightDistribution::Uniform { low, high } => 0.5 * (low + high),
            WeightDistribution::Gamma { shape, scale } => shape * scale,
            WeightDistribution::ConstantOne => 1.0,
        }
    }

    /// Raw draw for the `attempt`-th try, before quantization.
    fn sample(&self, key: u64, id: u64, attempt: u64) -> f64 {
        match *self {
            WeightDistribution::Exponential { rate } => {
                let u = unit(draw(key, id, attempt));
                if u == 0.0 {
                    0.0
                } else {
                    -u.ln() / rate
                }
            }
            WeightDistribution::Uniform { low, high } => low + (high - low) * unit(draw(key, id, attempt)),
            WeightDistribution::Gamma { shape, scale } => {
                // Each attempt gets its own sub-stream so retries never reuse draws.
                let mut rng = CounterStream {
                    key,
                    id,
                    counter: attempt << 32,
                };
                rand_distr::Gamma::new(shape, scale)
                    .expect("validated parameters")
                    .sample(&mut rng)
            }
            WeightDistribution::ConstantOne => 1.0,
        }
    }
}

impl fmt::Display for WeightDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            WeightDistribution::Exponential { rate } => write!(f, "exponential({rate})"),
            WeightDistribution::Uniform { low, high } => write!(f, "uniform({low},{high})"),
            WeightDistribution::Gamma { shape, scale } => write!(f, "gamma({shape},{scale})"),
            WeightDistribution::ConstantOne => write!(f, "constant"),
        }
    }
}

impl FromStr for WeightDistribution {
    type Err = FppError;

    /// Parses `NAME(params)`: `exponential(1)`, `uniform(0,1)`,
    /// `gamma(2,0.5)`, `constant`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let inner = s[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| FppError::Config(format!("distribution `{s}`: missing `)`")))?;
                (&s[..open], inner)
            }
            None => (s, ""),
        };
        let params: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| FppError::Config(format!("distribution `{s}`: bad parameter `{}`", p.trim())))
                })
                .collect::<Result<_>>()?
        };
        let arity = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(FppError::Config(format!(
                    "distribution `{name}` takes {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let dist = match name.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => {
                if params.is_empty() {
                    WeightDistribution::Exponential { rate: 1.0 }
                } else {
                    arity(1)?;
                    WeightDistribution::Exponential { rate: params[0] }
                }
            }
            "uniform" => {
                arity(2)?;
                WeightDistribution::Uniform { low: params[0], high: params[1] }
            }
            "gamma" => {
                arity(2)?;
                WeightDistribution::Gamma { shape: params[0], scale: params[1] }
            }
            "constant" | "constantone" | "one" => {
                arity(0)?;
                WeightDistribution::ConstantOne
            }
            other => return Err(FppError::Config(format!("unknown distribution `{other}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Source of edge weights for the shortest-path machinery. `f64::INFINITY`
/// marks an edge that must never be relaxed.
pub trait EdgeWeights: Sync {
    fn weight_of(&self, e: &Edge, id: EdgeId) -> f64;

    fn weight(&self, e: &Edge) -> f64 {
        self.weight_of(e, edge_id_unchecked(e))
    }
}

/// The environment ω: one i.i.d. positive weight per edge of Z².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeWeightField {
    seed: u64,
    distribution: WeightDistribution,
    key: u64,
}

impl EdgeWeightField {
    pub fn new(seed: u64, distribution: WeightDistribution) -> Result<Self> {
        distribution.validate()?;
        Ok(Self {
            seed,
            distribution,
            key: stream_key(seed, EDGE_DOMAIN),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn distribution(&self) -> WeightDistribution {
        self.distribution
    }

    /// Weight of the edge with id `id`; strictly positive and finite.
    #[inline]
    pub fn weight_by_id(&self, id: EdgeId) -> f64 {
        if let WeightDistribution::ConstantOne = self.distribution {
            return 1.0;
        }
        let mut attempt = 0u64;
        loop {
            let w = quantize(self.distribution.sample(self.key, id.0, attempt));
            if w > 0.0 && w.is_finite() {
                return w;
            }
            attempt += 1;
        }
    }
}

impl EdgeWeights for EdgeWeightField {
    #[inline]
    fn weight_of(&self, _e: &Edge, id: EdgeId) -> f64 {
        self.weight_by_id(id)
    }
}

/// Independent uniforms ξ_z attached to vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VertexNoise {
    seed: u64,
    key: u64,
}

impl VertexNoise {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            key: stream_key(seed, VERTEX_DOMAIN),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// ξ_z in `[0, 1)`.
    #[inline]
    pub fn value(&self, z: Vertex) -> f64 {
        unit(draw(self.key, z.code(), 0))
    }
}

/// Free-function form of [`VertexNoise::value`].
pub fn vertex_uniform(noise: &VertexNoise, z: Vertex) -> f64 {
    noise.value(z)
}

/// Free-function form of the field lookup.
pub fn weight(field: &EdgeWeightField, e: &Edge) -> f64 {
    field.weight(e)
}

/// Seed of trial `trial_index` under `master`:
/// `fmix(fmix(master ^ TRIAL_DOMAIN) + trial_index * 0x9e3779b97f4a7c15)`.
/// For a fixed master the map is a bijection of the index, so distinct
/// trials never share a seed.
pub fn derive_trial_seed(master: u64, trial_index: u64) -> u64 {
    fmix(stream_key(master, TRIAL_DOMAIN).wrapping_add(trial_index.wrapping_mul(GOLDEN)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Direction, Edge};
    use std::collections::HashSet;

    fn edges(n: usize) -> impl Iterator<Item = Edge> {
        (0..n).map(|i| {
            let x = (i % 1000) as i32 - 500;
            let y = (i / 1000) as i32 - 50;
            Edge::from_step(Vertex::new(x, y), if i % 3 == 0 { Direction::North } else { Direction::East })
        })
    }

    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    // Asymptotic 1% critical value of the one-sample KS statistic.
    fn ks_critical(n: usize) -> f64 {
        1.628 / (n as f64).sqrt()
    }

    #[test]
    fn constant_field_is_one() {
        let f = EdgeWeightField::new(9, WeightDistribution::ConstantOne).unwrap();
        assert!(edges(1000).all(|e| f.weight(&e) == 1.0));
    }

    #[test]
    fn exponential_mean_and_ks() {
        let f = EdgeWeightField::new(17, WeightDistribution::Exponential { rate: 1.0 }).unwrap();
        let xs: Vec<f64> = edges(100_000).map(|e| f.weight(&e)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        let d = ks_statistic(xs, |t| 1.0 - (-t).exp());
        assert!(d < ks_critical(100_000), "KS {d}");
    }

    #[test]
    fn uniform_ks() {
        let f = EdgeWeightField::new(3, WeightDistribution::Uniform { low: 0.5, high: 2.0 }).unwrap();
        let xs: Vec<f64> = edges(100_000).map(|e| f.weight(&e)).collect();
        assert!(xs.iter().all(|&w| (0.5..=2.0).contains(&w)));
        let d = ks_statistic(xs, |t| ((t - 0.5) / 1.5).clamp(0.0, 1.0));
        assert!(d < ks_critical(100_000), "KS {d}");
    }

    #[test]
    fn gamma_ks() {
        use statrs::distribution::{ContinuousCDF, Gamma};
        let (shape, scale) = (2.5, 0.4);
        let f = EdgeWeightField::new(5, WeightDistribution::Gamma { shape, scale }).unwrap();
        let xs: Vec<f64> = edges(100_000).map(|e| f.weight(&e)).collect();
        let law = Gamma::new(shape, 1.0 / scale).unwrap();
        let d = ks_statistic(xs, |t| law.cdf(t));
        assert!(d < ks_critical(100_000), "KS {d}");
    }

    #[test]
    fn weights_positive_and_dyadic() {
        for dist in [
            WeightDistribution::Exponential { rate: 4.0 },
            WeightDistribution::Uniform { low: 0.0, high: 1e-6 },
            WeightDistribution::Gamma { shape: 0.3, scale: 1.0 },
        ] {
            let f = EdgeWeightField::new(11, dist).unwrap();
            for e in edges(20_000) {
                let w = f.weight(&e);
                assert!(w > 0.0 && w.is_finite());
                let scaled = w * (1u64 << WEIGHT_GRID_BITS) as f64;
                assert_eq!(scaled, scaled.round());
            }
        }
    }

    #[test]
    fn purity_across_threads() {
        let f = EdgeWeightField::new(42, WeightDistribution::Exponential { rate: 1.0 }).unwrap();
        let e = Edge::from_step(Vertex::new(-7, 12), Direction::North);
        let reference = f.weight(&e).to_bits();
        let distinct: HashSet<u64> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..8)
                .map(|_| s.spawn(|| (0..125_000).map(|_| f.weight(&e).to_bits()).collect::<HashSet<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(distinct.len(), 1);
        assert!(distinct.contains(&reference));
    }

    #[test]
    fn vertex_noise_pure_and_uniform() {
        let noise = VertexNoise::new(8);
        let z = Vertex::new(3, -4);
        assert_eq!(noise.value(z).to_bits(), vertex_uniform(&noise, z).to_bits());
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|i| noise.value(Vertex::new(i % 400 - 200, i / 400))).collect();
        assert!(xs.iter().all(|&u| (0.0..1.0).contains(&u)));
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((0.497..=0.503).contains(&mean), "mean {mean}");
    }

    #[test]
    fn edge_and_vertex_streams_uncorrelated() {
        assert_ne!(EDGE_DOMAIN, VERTEX_DOMAIN);
        let seed = 77;
        let f = EdgeWeightField::new(seed, WeightDistribution::Uniform { low: 0.0, high: 1.0 }).unwrap();
        let noise = VertexNoise::new(seed);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for i in 0..100_000 {
            let v = Vertex::new(i % 400 - 200, i / 400 - 100);
            a.push(f.weight(&Edge::from_step(v, Direction::East)));
            b.push(noise.value(v));
        }
        let r = crate::stats::correlation(&a, &b);
        assert!(r.abs() < 0.01, "r = {r}");
    }

    #[test]
    fn trial_seeds_distinct_and_replayable() {
        assert_eq!(derive_trial_seed(5, 9), derive_trial_seed(5, 9));
        let seeds: HashSet<u64> = (0..1_000_000).map(|i| derive_trial_seed(123, i)).collect();
        assert_eq!(seeds.len(), 1_000_000);
    }

    #[test]
    fn distribution_parsing() {
        assert_eq!("exponential(1)".parse::<WeightDistribution>().unwrap(), WeightDistribution::Exponential { rate: 1.0 });
        assert_eq!(
            "uniform(0, 2)".parse::<WeightDistribution>().unwrap(),
            WeightDistribution::Uniform { low: 0.0, high: 2.0 }
        );
        assert_eq!("constant".parse::<WeightDistribution>().unwrap(), WeightDistribution::ConstantOne);
        assert!("uniform(2,1)".parse::<WeightDistribution>().is_err());
        assert!("gamma(1)".parse::<WeightDistribution>().is_err());
        assert!("cauchy(1)".parse::<WeightDistribution>().is_err());
        for d in [
            WeightDistribution::Exponential { rate: 2.5 },
            WeightDistribution::Uniform { low: 0.25, high: 3.0 },
            WeightDistribution::Gamma { shape: 2.0, scale: 0.5 },
            WeightDistribution::ConstantOne,
        ] {
            assert_eq!(d.to_string().parse::<WeightDistribution>().unwrap(), d);
        }
    }
}
