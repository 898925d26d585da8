//! Plain-text run configuration: `key = value` lines, `#` starts a comment.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::evolution::EvolutionConfig;
use crate::fem::LameParams;
use crate::geometry::{Aabb, GeometryConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Number of decades in the α ladder `10⁻¹ … 10^{-decades}`.
    pub alpha_decades: u32,
    pub betas: Vec<f64>,
    /// Required `dist(β, S_h ∪ {0})`.
    pub beta_margin: f64,
    /// Random data vectors per β.
    pub data_vectors: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { alpha_decades: 8, betas: vec![1.0, 2.5, 4.0, 6.5, 9.0], beta_margin: 0.5, data_vectors: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub params: LameParams,
    pub evolution: EvolutionConfig,
    pub sweep: SweepConfig,
    pub eigen_count: usize,
    pub seed: u64,
    /// Random states for the dissipativity check.
    pub random_states: usize,
    /// Random resolvent queries for the static relation.
    pub resolvent_queries: usize,
    /// Random queries for the z-decomposition.
    pub z_queries: usize,
    pub traction_ns: Vec<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometryConfig::default(),
            params: LameParams::default(),
            evolution: EvolutionConfig::default(),
            sweep: SweepConfig::default(),
            eigen_count: 10,
            seed: 7,
            random_states: 100,
            resolvent_queries: 50,
            z_queries: 20,
            traction_ns: vec![4, 8, 16],
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse `{v}` for `{key}`") })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_value(line, key, s.trim())).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

const KEYS: &[&str] = &[
    "n",
    "outer_min",
    "outer_max",
    "inner_min",
    "inner_max",
    "mu",
    "lambda",
    "mu_thin",
    "lambda_thin",
    "dt",
    "t_final",
    "theta",
    "sample_every",
    "alpha_decades",
    "betas",
    "beta_margin",
    "sweep_data",
    "eigen_count",
    "seed",
    "random_states",
    "resolvent_queries",
    "z_queries",
    "traction_ns",
    "output_dir",
];

/// Parses and validates a configuration. Missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected `key = value`, got `{body}`") })?;
        let (key, v) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::Parse { line, msg: format!("unknown key `{key}`") });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
        }
        let g = &mut cfg.geometry;
        match key {
            "n" => g.n = parse_value(line, key, v)?,
            "outer_min" => g.outer.min = [parse_value(line, key, v)?; 3],
            "outer_max" => g.outer.max = [parse_value(line, key, v)?; 3],
            "inner_min" => g.inner.min = [parse_value(line, key, v)?; 3],
            "inner_max" => g.inner.max = [parse_value(line, key, v)?; 3],
            "mu" => cfg.params.mu = parse_value(line, key, v)?,
            "lambda" => cfg.params.lambda = parse_value(line, key, v)?,
            "mu_thin" => cfg.params.mu_thin = parse_value(line, key, v)?,
            "lambda_thin" => cfg.params.lambda_thin = parse_value(line, key, v)?,
            "dt" => cfg.evolution.dt = parse_value(line, key, v)?,
            "t_final" => cfg.evolution.t_final = parse_value(line, key, v)?,
            "theta" => cfg.evolution.theta = parse_value(line, key, v)?,
            "sample_every" => cfg.evolution.sample_every = parse_value(line, key, v)?,
            "alpha_decades" => cfg.sweep.alpha_decades = parse_value(line, key, v)?,
            "betas" => cfg.sweep.betas = parse_list(line, key, v)?,
            "beta_margin" => cfg.sweep.beta_margin = parse_value(line, key, v)?,
            "sweep_data" => cfg.sweep.data_vectors = parse_value(line, key, v)?,
            "eigen_count" => cfg.eigen_count = parse_value(line, key, v)?,
            "seed" => cfg.seed = parse_value(line, key, v)?,
            "random_states" => cfg.random_states = parse_value(line, key, v)?,
            "resolvent_queries" => cfg.resolvent_queries = parse_value(line, key, v)?,
            "z_queries" => cfg.z_queries = parse_value(line, key, v)?,
            "traction_ns" => cfg.traction_ns = parse_list(line, key, v)?,
            "output_dir" => cfg.output_dir = PathBuf::from(v),
            _ => unreachable!(),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Validation { field: field.into(), msg });
        let g = &self.geometry;
        let cubic = |b: &Aabb| b.min.iter().all(|&c| c == b.min[0]) && b.max.iter().all(|&c| c == b.max[0]);
        if !cubic(&g.outer) || !cubic(&g.inner) {
            return bad("inner_min", "boxes must be cubes".into());
        }
        match g.validate() {
            Err(Error::DegenerateBox) => {
                return bad("inner_min", "inner box must lie strictly inside the outer box".into())
            }
            Err(e @ Error::GridMisaligned { .. }) => return bad("n", e.to_string()),
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        self.params.validate()?;
        self.evolution.validate()?;
        if self.sweep.alpha_decades == 0 {
            return bad("alpha_decades", "must be at least 1".into());
        }
        if self.sweep.betas.iter().any(|b| !b.is_finite()) {
            return bad("betas", "must be finite".into());
        }
        if !(self.sweep.beta_margin >= 0.0) {
            return bad("beta_margin", "must be nonnegative".into());
        }
        if self.eigen_count == 0 {
            return bad("eigen_count", "must be at least 1".into());
        }
        if self.traction_ns.len() < 2 || self.traction_ns.windows(2).any(|w| w[1] != 2 * w[0]) {
            return bad("traction_ns", "need at least two resolutions, each double the previous".into());
        }
        Ok(())
    }

    /// Serializes every key; `parse_config` of the output returns `self`.
    pub fn to_text(&self) -> String {
        let g = &self.geometry;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n", g.n.to_string());
        kv("outer_min", g.outer.min[0].to_string());
        kv("outer_max", g.outer.max[0].to_string());
        kv("inner_min", g.inner.min[0].to_string());
        kv("inner_max", g.inner.max[0].to_string());
        kv("mu", self.params.mu.to_string());
        kv("lambda", self.params.lambda.to_string());
        kv("mu_thin", self.params.mu_thin.to_string());
        kv("lambda_thin", self.params.lambda_thin.to_string());
        kv("dt", self.evolution.dt.to_string());
        kv("t_final", self.evolution.t_final.to_string());
        kv("theta", self.evolution.theta.to_string());
        kv("sample_every", self.evolution.sample_every.to_string());
        kv("alpha_decades", self.sweep.alpha_decades.to_string());
        kv("betas", join(&self.sweep.betas));
        kv("beta_margin", self.sweep.beta_margin.to_string());
        kv("sweep_data", self.sweep.data_vectors.to_string());
        kv("eigen_count", self.eigen_count.to_string());
        kv("seed", self.seed.to_string());
        kv("random_states", self.random_states.to_string());
        kv("resolvent_queries", self.resolvent_queries.to_string());
        kv("z_queries", self.z_queries.to_string());
        kv("traction_ns", join(&self.traction_ns));
        kv("output_dir", self.output_dir.display().to_string());
        s
    }
}
