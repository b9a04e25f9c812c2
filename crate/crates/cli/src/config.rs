//! Run configuration: JSON file plus command-line overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Parser;
use fpp_core::lattice::policy_half_width;
use fpp_core::weights::WeightDistribution;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Largest window half-width any command may request.
pub const MAX_HALF_WIDTH: u32 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Shape,
    Midpoint,
    Busemann,
    Labels,
    Coalesce,
    Exponents,
    Geodesic,
    Render,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Shape,
        Command::Midpoint,
        Command::Busemann,
        Command::Labels,
        Command::Coalesce,
        Command::Exponents,
        Command::Geodesic,
        Command::Render,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Shape => "shape",
            Command::Midpoint => "midpoint",
            Command::Busemann => "busemann",
            Command::Labels => "labels",
            Command::Coalesce => "coalesce",
            Command::Exponents => "exponents",
            Command::Geodesic => "geodesic",
            Command::Render => "render",
        }
    }

    fn default_trials(self) -> usize {
        match self {
            Command::Shape => 100,
            Command::Midpoint => 1000,
            Command::Busemann => 10,
            Command::Labels => 10,
            Command::Coalesce => 100,
            Command::Exponents => 200,
            Command::Geodesic | Command::Render => 1,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                format!("unknown command `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    #[default]
    Mono,
    Ocean,
    Ember,
}

impl Palette {
    pub fn stroke(self) -> &'static str {
        match self {
            Palette::Mono => "#222222",
            Palette::Ocean => "#1f4e79",
            Palette::Ember => "#8c2d04",
        }
    }

    pub fn accent(self) -> &'static str {
        match self {
            Palette::Mono => "#b00000",
            Palette::Ocean => "#e07b00",
            Palette::Ember => "#2166ac",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderOptions {
    pub stroke_scale: f64,
    pub palette: Palette,
    /// Annotate flow-tree leaves with their labels.
    pub labels: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            stroke_scale: 1.0,
            palette: Palette::Mono,
            labels: false,
        }
    }
}

/// A lattice point written `"x:y"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Point(pub i32, pub i32);

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.1)
    }
}

impl FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (x, y) = s.split_once(':').ok_or_else(|| format!("point `{s}` must look like x:y"))?;
        let p = |t: &str| t.trim().parse::<i32>().map_err(|_| format!("point `{s}`: bad coordinate `{t}`"));
        Ok(Point(p(x)?, p(y)?))
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

mod distribution_str {
    use super::*;

    pub fn serialize<S: Serializer>(d: &WeightDistribution, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(d)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<WeightDistribution, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_distribution() -> WeightDistribution {
    WeightDistribution::Exponential { rate: 1.0 }
}

fn default_outdir() -> PathBuf {
    PathBuf::from("out")
}

fn default_level() -> u32 {
    2
}

fn default_max_class() -> usize {
    64
}

/// Everything a run needs. Unset optional fields take per-command defaults
/// when the run starts; `resolve` applies them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_distribution", with = "distribution_str")]
    pub distribution: WeightDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u32>>,
    /// Number of equally spaced directions for the shape grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    /// Window half-width override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u32>,
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_outdir")]
    pub outdir: PathBuf,
    #[serde(default = "default_level")]
    pub level: u32,
    #[serde(default = "default_max_class")]
    pub max_class: usize,
    /// Enables the extended-shape check in `shape`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separations: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_radius: Option<u32>,
    /// Ray direction in radians for `busemann`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Point>,
    #[serde(default)]
    pub render: RenderOptions,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            seed: 0,
            distribution: default_distribution(),
            trials: None,
            radii: None,
            sizes: None,
            directions: None,
            window: None,
            threads: 0,
            outdir: default_outdir(),
            level: default_level(),
            max_class: default_max_class(),
            epsilon: None,
            offsets: None,
            separations: None,
            target_radius: None,
            theta: None,
            from: None,
            to: None,
            render: RenderOptions::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    /// Fills unset fields with the command's defaults.
    pub fn resolve(&self) -> RunConfig {
        let mut c = self.clone();
        c.trials.get_or_insert(c.command.default_trials());
        match c.command {
            Command::Shape => {
                c.radii.get_or_insert_with(|| vec![16.0, 32.0, 64.0]);
                c.directions.get_or_insert(16);
                if c.epsilon.is_some() {
                    c.offsets.get_or_insert_with(|| vec![4.0, 8.0]);
                }
            }
            Command::Midpoint => {
                c.sizes.get_or_insert_with(|| vec![8, 16, 32, 64]);
            }
            Command::Busemann => {
                c.radii.get_or_insert_with(|| fpp_core::busemann::geometric_radii(16.0, 4));
                c.theta.get_or_insert(0.0);
            }
            Command::Labels => {
                c.window.get_or_insert(64);
            }
            Command::Coalesce => {
                c.separations.get_or_insert_with(|| vec![2, 8, 32]);
                c.target_radius.get_or_insert(256);
            }
            Command::Exponents => {
                c.sizes.get_or_insert_with(|| vec![32, 64, 128, 256]);
            }
            Command::Geodesic => {
                c.from.get_or_insert(Point(0, 0));
                c.to.get_or_insert(Point(32, 0));
            }
            Command::Render => {
                c.window.get_or_insert(16);
            }
        }
        c
    }

    /// Checks every numeric parameter against the window policy.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = self.resolve();
        let fail = |m: String| Err(ConfigError(m));
        if let Err(e) = c.distribution.validate() {
            return fail(e.to_string());
        }
        if c.trials == Some(0) {
            return fail("trials must be positive".into());
        }
        if c.level == 0 {
            return fail("level must be at least 1".into());
        }
        if c.max_class == 0 {
            return fail("max_class must be positive".into());
        }
        if !(c.render.stroke_scale > 0.0 && c.render.stroke_scale.is_finite()) {
            return fail("render.stroke_scale must be positive".into());
        }
        let policy = |what: &str, r: f64| -> Result<(), ConfigError> {
            let hw = c.window.unwrap_or_else(|| policy_half_width(r));
            if hw > MAX_HALF_WIDTH {
                return Err(ConfigError(format!(
                    "{what} {r}: window half-width {hw} exceeds the maximum {MAX_HALF_WIDTH}"
                )));
            }
            if r > hw as f64 * 2.0 / 3.0 + 1e-9 {
                return Err(ConfigError(format!(
                    "{what} {r} violates constraint radius <= 2/3 * window half-width ({hw})"
                )));
            }
            Ok(())
        };
        if let Some(radii) = &c.radii {
            if radii.is_empty() || radii.iter().any(|r| !(*r >= 1.0) || !r.is_finite()) {
                return fail("radii must be a nonempty list of numbers >= 1".into());
            }
            if c.command == Command::Busemann && radii.windows(2).any(|p| p[0] >= p[1]) {
                return fail("busemann radii must be increasing".into());
            }
            policy("radius", radii.iter().copied().fold(0.0, f64::max))?;
        }
        if let Some(sizes) = &c.sizes {
            if sizes.is_empty() || sizes.iter().any(|&s| s < 2) {
                return fail("sizes must be a nonempty list of integers >= 2".into());
            }
            if c.command == Command::Exponents && sizes.len() < 3 {
                return fail(format!("exponent fits need at least 3 sizes, got {}", sizes.len()));
            }
            policy("size", *sizes.iter().max().unwrap() as f64)?;
        }
        if c.directions == Some(0) {
            return fail("directions must be positive".into());
        }
        if let Some(w) = c.window {
            if w == 0 || w > MAX_HALF_WIDTH {
                return fail(format!("window half-width must lie in 1..={MAX_HALF_WIDTH}"));
            }
        }
        if let Some(e) = c.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return fail("epsilon must be a finite number >= 0".into());
            }
            let offsets = c.offsets.as_deref().unwrap_or(&[]);
            if offsets.is_empty() || offsets.iter().any(|o| !(*o >= 1.0) || !o.is_finite()) {
                return fail("offsets must be a nonempty list of numbers >= 1".into());
            }
            let o = offsets.iter().copied().fold(0.0, f64::max);
            if policy_half_width(o) > MAX_HALF_WIDTH {
                return fail(format!("offset {o} needs a window beyond the maximum half-width"));
            }
        }
        if c.command == Command::Coalesce {
            let r = c.target_radius.unwrap();
            if r < 2 {
                return fail("target_radius must be at least 2".into());
            }
            policy("target_radius", r as f64)?;
            let seps = c.separations.as_deref().unwrap();
            if seps.is_empty() {
                return fail("separations must be nonempty".into());
            }
            if let Some(s) = seps.iter().find(|&&s| s as f64 > r as f64 / 8.0) {
                return fail(format!("separation {s} violates constraint separation <= target_radius / 8"));
            }
        }
        if let Some(t) = c.theta {
            if !t.is_finite() {
                return fail("theta must be finite".into());
            }
        }
        if c.command == Command::Geodesic {
            let (a, b) = (c.from.unwrap(), c.to.unwrap());
            let reach = (a.0 - b.0).abs().max((a.1 - b.1).abs()) as f64;
            if reach == 0.0 {
                return Ok(());
            }
            policy("geodesic span", reach)?;
        }
        Ok(())
    }

    /// Short hex digest of the configuration, ignoring the thread count and
    /// output directory (which do not change results).
    pub fn hash(&self) -> String {
        let mut c = self.resolve();
        c.threads = 0;
        c.outdir = PathBuf::new();
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("configs serialize"));
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Comma-separated flag value, e.g. `8,16,32`.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn comma_list<T: FromStr>(s: &str) -> Result<List<T>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| format!("bad list element `{}`", t.trim())))
        .collect::<Result<_, _>>()
        .map(List)
}

/// Command-line flags; every flag overrides the matching config-file field.
#[derive(Debug, Parser)]
#[command(name = "fpp", about = "First-passage percolation experiments on Z^2", version)]
pub struct Flags {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// shape, midpoint, busemann, labels, coalesce, exponents, geodesic or render.
    #[arg(long)]
    pub command: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated radii.
    #[arg(long, value_parser = comma_list::<f64>)]
    pub radii: Option<List<f64>>,
    /// Comma-separated sizes.
    #[arg(long, value_parser = comma_list::<u32>)]
    pub sizes: Option<List<u32>>,
    /// e.g. exponential(1), uniform(0.5,1.5), gamma(2,0.5), constant.
    #[arg(long)]
    pub distribution: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub outdir: Option<PathBuf>,
    /// Voronoi level for labels.
    #[arg(long)]
    pub level: Option<u32>,
    /// Tolerance for the extended-shape check.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub directions: Option<usize>,
    /// Window half-width.
    #[arg(long)]
    pub window: Option<u32>,
    #[arg(long, value_parser = comma_list::<u32>)]
    pub separations: Option<List<u32>>,
    #[arg(long)]
    pub target_radius: Option<u32>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Geodesic start, x:y.
    #[arg(long)]
    pub from: Option<Point>,
    /// Geodesic end, x:y.
    #[arg(long)]
    pub to: Option<Point>,
}

impl Flags {
    /// Reads the config file (if any), applies overrides and validates.
    pub fn into_config(self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
                Some(RunConfig::from_json(&text)?)
            }
            None => None,
        };
        let command = match self.command.as_deref() {
            Some(name) => Some(name.parse::<Command>().map_err(ConfigError)?),
            None => None,
        };
        let mut c = match (cfg.take(), command) {
            (Some(mut c), Some(cmd)) => {
                c.command = cmd;
                c
            }
            (Some(c), None) => c,
            (None, Some(cmd)) => RunConfig::new(cmd),
            (None, None) => return Err(ConfigError("no command given (use --command or a config file)".into())),
        };
        if let Some(d) = self.distribution {
            c.distribution = d.parse().map_err(|e: fpp_core::FppError| ConfigError(e.to_string()))?;
        }
        macro_rules! over {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        macro_rules! over_opt {
            ($($field:ident),*) => { $( if self.$field.is_some() { c.$field = self.$field; } )* };
        }
        over!(seed, threads, outdir, level);
        over_opt!(trials, epsilon, directions, window, target_radius, theta, from, to);
        for (dst, src) in [(&mut c.sizes, self.sizes), (&mut c.separations, self.separations)] {
            if let Some(List(v)) = src {
                *dst = Some(v);
            }
        }
        if let Some(List(v)) = self.radii {
            c.radii = Some(v);
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_is_valid() {
        let c = RunConfig::from_json(r#"{"command": "shape", "seed": 1}"#).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.distribution, WeightDistribution::Exponential { rate: 1.0 });
        c.validate().unwrap();
        assert_eq!(c.resolve().radii, Some(vec![16.0, 32.0, 64.0]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{"command": "shape", "sede": 1}"#).unwrap_err();
        assert!(err.0.contains("sede"), "{err}");
        assert!(err.0.contains("line"), "{err}");
    }

    #[test]
    fn oversized_radius_names_constraint() {
        let mut c = RunConfig::new(Command::Shape);
        c.radii = Some(vec![100.0]);
        c.window = Some(120);
        let err = c.validate().unwrap_err();
        assert!(err.0.contains("2/3 * window half-width"), "{err}");
        c.window = None;
        c.radii = Some(vec![900.0]);
        assert!(c.validate().unwrap_err().0.contains("maximum"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"command": "midpoint", "seed": 4, "trials": 9}"#).unwrap();
        let flags = Flags::parse_from(["fpp", "--config", path.to_str().unwrap(), "--seed", "7", "--sizes", "4,8"]);
        let c = flags.into_config().unwrap();
        assert_eq!((c.command, c.seed, c.trials, c.sizes), (Command::Midpoint, 7, Some(9), Some(vec![4, 8])));
    }

    #[test]
    fn hash_ignores_threads_and_outdir() {
        let mut a = RunConfig::new(Command::Shape);
        let mut b = a.clone();
        b.threads = 8;
        b.outdir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        a.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    fn arb_distribution() -> impl Strategy<Value = WeightDistribution> {
        prop_oneof![
            (0.01f64..10.0).prop_map(|rate| WeightDistribution::Exponential { rate }),
            (0.0f64..1.0, 0.01f64..5.0).prop_map(|(low, w)| WeightDistribution::Uniform { low, high: low + w }),
            (0.1f64..5.0, 0.1f64..5.0).prop_map(|(shape, scale)| WeightDistribution::Gamma { shape, scale }),
            Just(WeightDistribution::ConstantOne),
        ]
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            proptest::sample::select(Command::ALL.to_vec()),
            any::<u64>(),
            arb_distribution(),
            proptest::option::of(1usize..10_000),
            proptest::option::of(proptest::collection::vec(1.0f64..200.0, 1..5)),
            proptest::option::of(proptest::collection::vec(2u32..300, 1..5)),
            (0usize..16, 1u32..5, proptest::option::of(0.0f64..1.0)),
            (
                proptest::option::of((-50i32..50, -50i32..50)),
                0.1f64..4.0,
                proptest::sample::select(vec![Palette::Mono, Palette::Ocean, Palette::Ember]),
                any::<bool>(),
            ),
        )
            .prop_map(|(command, seed, distribution, trials, radii, sizes, (threads, level, epsilon), (from, scale, palette, labels))| {
                let mut c = RunConfig::new(command);
                c.seed = seed;
                c.distribution = distribution;
                c.trials = trials;
                c.radii = radii;
                c.sizes = sizes;
                c.threads = threads;
                c.level = level;
                c.epsilon = epsilon;
                c.from = from.map(|(x, y)| Point(x, y));
                c.render = RenderOptions { stroke_scale: scale, palette, labels };
                c
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn config_round_trips(c in arb_config()) {
            let back = RunConfig::from_json(&c.to_json()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
