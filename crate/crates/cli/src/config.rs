//! Experiment files: TOML with `[workload]`, `[costs]`, `[sim]` and `[output]` tables.
//!
//! ```toml
//! [workload]
//! kind = "poisson"
//! lambda = 10.0
//! read_ratio = 0.9
//! num_keys = 1000
//! duration = 100.0
//!
//! [costs]
//! bottleneck = "cache_or_backend_cpu"
//! key_size = 16
//! value_size = 128
//!
//! [sim]
//! policies = ["ttl-expiry", "update", "invalidate", "adaptive"]
//! t_range = { min = 0.01, max = 10.0, points = 10 }
//! cache_capacity = 1000
//!
//! [output]
//! dir = "out"
//! format = "csv"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use freshlab::costs::{derive_costs, CostProfile};
use freshlab::freshmodel::CostParams;
use freshlab::policies::PolicyDescriptor;
use freshlab::simcore::TtlClock;
use freshlab::sketch::SketchConfig;
use freshlab::workload::{WorkloadSpec, DEFAULT_KEY_SIZE, DEFAULT_VALUE_SIZE};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Gnuplot,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "gnuplot" => Ok(OutputFormat::Gnuplot),
            other => Err(format!("unknown format `{other}` (expected csv, json or gnuplot)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Gnuplot => "gnuplot",
        })
    }
}

/// Log-spaced staleness bounds, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl TRange {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if !(self.min.is_finite() && self.min > 0.0 && self.max.is_finite() && self.max >= self.min) {
            return Err(CliError::Usage(format!(
                "T range needs 0 < min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        match self.points {
            0 => Err(CliError::Usage("T range needs at least one point".into())),
            1 => Ok(vec![self.min]),
            n => {
                let (lo, hi) = (self.min.log10(), self.max.log10());
                let mut out: Vec<f64> = (0..n)
                    .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
                    .collect();
                out[0] = self.min;
                out[n - 1] = self.max;
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    policies: Option<Vec<String>>,
    t_values: Option<Vec<f64>>,
    t_range: Option<TRange>,
    cache_capacity: Option<usize>,
    horizon: Option<f64>,
    horizon_intervals: Option<f64>,
    seed: Option<u64>,
    ttl_clock: Option<TtlClock>,
    transcript: Option<bool>,
    per_key: Option<bool>,
    workers: Option<usize>,
    estimators: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    workload: Option<WorkloadSpec>,
    costs: Option<toml::Table>,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    output: RawOutput,
}

/// Cost profile plus the object sizes it is evaluated at.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostSection {
    pub profile: CostProfile,
    pub key_size: Option<u64>,
    pub value_size: Option<u64>,
}

impl CostSection {
    /// Sizes fall back to the workload's, then to 16/128 bytes.
    pub fn params(&self, workload: Option<&WorkloadSpec>) -> Result<CostParams, CliError> {
        let (wk, wv) = workload_sizes(workload);
        let key = self.key_size.unwrap_or(wk);
        let value = self.value_size.unwrap_or(wv);
        derive_costs(&self.profile, key, value).map_err(|e| CliError::Config(format!("[costs]: {e}")))
    }
}

fn workload_sizes(workload: Option<&WorkloadSpec>) -> (u64, u64) {
    let spec = match workload {
        Some(WorkloadSpec::Poisson(p)) => Some(p),
        Some(WorkloadSpec::Mixture(m)) => m.components.first().map(|c| &c.spec),
        _ => None,
    };
    match spec {
        Some(p) => (p.key_size as u64, p.value_size as u64),
        None => (DEFAULT_KEY_SIZE as u64, DEFAULT_VALUE_SIZE as u64),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Horizon {
    /// The workload's own duration.
    Workload,
    Seconds(f64),
    /// A multiple of each sweep point's staleness bound.
    Intervals(f64),
}

/// A fully parsed experiment; command-line flags are applied on top of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub workload: Option<WorkloadSpec>,
    pub costs: CostSection,
    pub policies: Vec<PolicyDescriptor>,
    pub t_values: Vec<f64>,
    pub cache_capacity: usize,
    pub horizon: Horizon,
    pub seed: Option<u64>,
    pub ttl_clock: TtlClock,
    pub transcript: bool,
    pub per_key: bool,
    pub workers: Option<usize>,
    pub estimators: Vec<SketchConfig>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            workload: None,
            costs: CostSection::default(),
            policies: Vec::new(),
            t_values: Vec::new(),
            cache_capacity: 1000,
            horizon: Horizon::Workload,
            seed: None,
            ttl_clock: TtlClock::Aligned,
            transcript: false,
            per_key: false,
            workers: None,
            estimators: Vec::new(),
            out_dir: PathBuf::from("."),
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = ExperimentConfig::default();

        if let Some(w) = raw.workload {
            w.validate().map_err(|e| CliError::Config(format!("[workload]: {e}")))?;
            cfg.workload = Some(w);
        }
        if let Some(mut table) = raw.costs {
            cfg.costs.key_size = take_size(&mut table, "key_size")?;
            cfg.costs.value_size = take_size(&mut table, "value_size")?;
            cfg.costs.profile = CostProfile::deserialize(toml::Value::Table(table))
                .map_err(|e| CliError::Config(format!("[costs]: {}", e.message())))?;
        }

        let sim = raw.sim;
        if let Some(list) = sim.policies {
            cfg.policies = parse_policies(&list).map_err(|e| CliError::Config(format!("[sim] policies: {e}")))?;
        }
        cfg.t_values = match (sim.t_values, sim.t_range) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "[sim]: give either t_values or t_range, not both".into(),
                ))
            }
            (Some(v), None) => v,
            (None, Some(r)) => r
                .values()
                .map_err(|e| CliError::Config(format!("[sim] t_range: {e}")))?,
            (None, None) => Vec::new(),
        };
        if let Some(cap) = sim.cache_capacity {
            cfg.cache_capacity = cap;
        }
        cfg.horizon = match (sim.horizon, sim.horizon_intervals) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "[sim]: give either horizon or horizon_intervals, not both".into(),
                ))
            }
            (Some(h), None) => Horizon::Seconds(h),
            (None, Some(n)) => Horizon::Intervals(n),
            (None, None) => Horizon::Workload,
        };
        cfg.seed = sim.seed;
        cfg.ttl_clock = sim.ttl_clock.unwrap_or_default();
        cfg.transcript = sim.transcript.unwrap_or(false);
        cfg.per_key = sim.per_key.unwrap_or(false);
        cfg.workers = sim.workers;
        if let Some(list) = sim.estimators {
            cfg.estimators = parse_estimators(&list).map_err(|e| CliError::Config(format!("[sim] estimators: {e}")))?;
        }

        if let Some(dir) = raw.output.dir {
            cfg.out_dir = dir;
        }
        cfg.format = raw.output.format.unwrap_or_default();
        Ok(cfg)
    }

    /// Workload with the run seed applied, if one was given.
    pub fn seeded_workload(&self) -> Option<WorkloadSpec> {
        let w = self.workload.as_ref()?;
        Some(match self.seed {
            Some(seed) => w.reseeded(seed),
            None => w.clone(),
        })
    }

    pub fn cost_params(&self) -> Result<CostParams, CliError> {
        self.costs.params(self.workload.as_ref())
    }

    pub fn check_sim_inputs(&self) -> Result<(), CliError> {
        if self.policies.is_empty() {
            return Err(CliError::Usage("no policies given".into()));
        }
        check_t_values(&self.t_values)?;
        if self.cache_capacity == 0 {
            return Err(CliError::Usage("cache_capacity must be at least 1".into()));
        }
        match self.horizon {
            Horizon::Seconds(h) | Horizon::Intervals(h) if !(h.is_finite() && h > 0.0) => {
                Err(CliError::Usage(format!("horizon must be positive, got {h}")))
            }
            _ => Ok(()),
        }
    }
}

pub fn check_t_values(values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("no staleness bounds (T) given".into()));
    }
    if let Some(bad) = values.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(CliError::Usage(format!("staleness bound must be positive, got {bad}")));
    }
    Ok(())
}

fn take_size(table: &mut toml::Table, name: &str) -> Result<Option<u64>, CliError> {
    match table.remove(name) {
        None => Ok(None),
        Some(toml::Value::Integer(n)) if n > 0 => Ok(Some(n as u64)),
        Some(other) => Err(CliError::Config(format!(
            "[costs] {name}: expected a positive integer, got {other}"
        ))),
    }
}

pub fn parse_policies(list: &[String]) -> Result<Vec<PolicyDescriptor>, String> {
    list.iter()
        .map(|s| s.parse::<PolicyDescriptor>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

pub fn parse_estimators(list: &[String]) -> Result<Vec<SketchConfig>, String> {
    list.iter()
        .map(|s| s.parse::<SketchConfig>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}
