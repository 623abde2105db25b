//! Experiment configuration: JSON (primary) or flat `key = value` text.
//!
//! JSON nests blocks under their names; the flat form uses dotted keys
//! (`trunc.cap1 = 40`, `sweep.grid = 0, 0.5, 1`) with the model parameters
//! at top level.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use qinv::kv;
use qinv::solver::{SolveMethod, TruncationSpec};
use qinv::{Error, ModelParams, ParamAxis, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Stability classification only.
    Classify,
    /// Truncated stationary solve per grid point.
    Solve,
    /// Zero-service-time inventory distribution per grid point.
    Instant,
    /// Simulation per grid point, one RNG stream each.
    Simulate,
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <SweepMode as ValueEnum>::from_str(s, false)
            .map_err(|_| Error::Parse(format!("unknown sweep mode `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub method: Option<SolveMethod>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub events: Option<u64>,
    pub warmup: Option<u64>,
    pub batches: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: ParamAxis,
    pub grid: Vec<f64>,
    pub mode: Option<SweepMode>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    #[serde(default)]
    pub trunc: Option<TruncationSpec>,
    #[serde(default)]
    pub solver: SolverBlock,
    /// Box for the drift check.
    #[serde(default)]
    pub drift: Option<TruncationSpec>,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ExperimentConfig {
    pub fn new(params: ModelParams) -> Self {
        ExperimentConfig {
            params,
            trunc: None,
            solver: SolverBlock::default(),
            drift: None,
            sim: SimBlock::default(),
            sweep: None,
            output: OutputBlock::default(),
        }
    }

    /// JSON if the text starts with `{`, flat key-value otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = if text.trim_start().starts_with('{') {
            serde_json::from_str::<ExperimentConfig>(text)?
        } else {
            Self::from_kv(text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sw) = &self.sweep {
            validate_grid(&self.params, sw.axis, &sw.grid)?;
        }
        Ok(())
    }

    fn from_kv(text: &str) -> Result<Self> {
        let map = kv::parse(text)?;
        for key in map.keys() {
            if !is_known_kv_key(key) {
                return Err(Error::Parse(format!("unknown key `{key}`")));
            }
        }
        let mut cfg = ExperimentConfig::new(ModelParams::from_kv_map(&map)?);
        cfg.trunc = kv_trunc(&map, "trunc")?;
        cfg.drift = kv_trunc(&map, "drift")?;
        if let Some(v) = map.get("solver.method") {
            cfg.solver.method = Some(match v.as_str() {
                "auto" => SolveMethod::Auto,
                "gth" => SolveMethod::Gth,
                "power" => SolveMethod::Power,
                other => return Err(Error::Parse(format!("`solver.method`: unknown method `{other}`"))),
            });
        }
        cfg.solver.tolerance = opt(&map, "solver.tolerance", |v, k| v.parse_f64(k))?;
        cfg.sim.seed = opt(&map, "sim.seed", |v, k| parse_u64(v.as_str(), k))?;
        cfg.sim.stream = opt(&map, "sim.stream", |v, k| parse_u64(v.as_str(), k))?;
        cfg.sim.events = opt(&map, "sim.events", |v, k| parse_count(v.as_str()).map_err(|e| key_err(k, e)))?;
        cfg.sim.warmup = opt(&map, "sim.warmup", |v, k| parse_count(v.as_str()).map_err(|e| key_err(k, e)))?;
        cfg.sim.batches = opt(&map, "sim.batches", |v, k| Ok(v.parse_u32(k)? as usize))?;
        if map.keys().any(|k| k.starts_with("sweep.")) {
            let axis = kv::require(&map, "sweep.axis")?;
            let axis = ParamAxis::from_str(axis.as_str())?;
            let grid = parse_grid(kv::require(&map, "sweep.grid")?.as_str())?;
            let mode = opt(&map, "sweep.mode", |v, _| <SweepMode as FromStr>::from_str(v.as_str()))?;
            let workers = opt(&map, "sweep.workers", |v, k| Ok(v.parse_u32(k)? as usize))?;
            cfg.sweep = Some(SweepBlock { axis, grid, mode, workers });
        }
        cfg.output.path = map.get("output.path").map(PathBuf::from);
        cfg.output.format = opt(&map, "output.format", |v, _| {
            <Format as ValueEnum>::from_str(v.as_str(), false)
                .map_err(|_| Error::Parse(format!("`output.format`: expected csv or json, got `{}`", v.as_str())))
        })?;
        Ok(cfg)
    }
}

const KV_KEYS: &[&str] = &[
    "trunc.cap1",
    "trunc.cap2",
    "drift.cap1",
    "drift.cap2",
    "solver.method",
    "solver.tolerance",
    "sim.seed",
    "sim.stream",
    "sim.events",
    "sim.warmup",
    "sim.batches",
    "sweep.axis",
    "sweep.grid",
    "sweep.mode",
    "sweep.workers",
    "output.path",
    "output.format",
];

fn is_known_kv_key(key: &str) -> bool {
    ParamAxis::from_str(key).is_ok() || KV_KEYS.contains(&key)
}

fn key_err(key: &str, e: String) -> Error {
    Error::Parse(format!("`{key}`: {e}"))
}

fn opt<T>(
    map: &BTreeMap<String, String>,
    key: &str,
    f: impl Fn(kv::Value<'_>, &str) -> Result<T>,
) -> Result<Option<T>> {
    if map.contains_key(key) {
        Ok(Some(f(kv::require(map, key)?, key)?))
    } else {
        Ok(None)
    }
}

fn kv_trunc(map: &BTreeMap<String, String>, block: &str) -> Result<Option<TruncationSpec>> {
    let k1 = format!("{block}.cap1");
    let k2 = format!("{block}.cap2");
    if !map.contains_key(&k1) && !map.contains_key(&k2) {
        return Ok(None);
    }
    let cap1 = kv::require(map, &k1)?.parse_u32(&k1)?;
    let cap2 = kv::require(map, &k2)?.parse_u32(&k2)?;
    Ok(Some(TruncationSpec::new(cap1, cap2)))
}

fn parse_u64(s: &str, key: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("`{key}`: expected a non-negative integer, got `{s}`")))
}

/// Accepts plain integers and integral scientific notation (`1e7`).
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 => Ok(x as u64),
        _ => Err(format!("expected a non-negative integer, got `{s}`")),
    }
}

/// Comma-separated numbers.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = s
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("grid value `{t}` is not a number")))
        })
        .collect::<Result<_>>()?;
    Ok(grid)
}

pub fn validate_grid(params: &ModelParams, axis: ParamAxis, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "sweep.grid",
            reason: "grid is empty".into(),
        });
    }
    for &v in grid {
        params.with(axis, v)?;
    }
    Ok(())
}
