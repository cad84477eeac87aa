//! Per-key read/write statistics used to estimate `E[W]`, the expected number
//! of writes between reads.
//!
//! Three estimators share the [`RwEstimator`] interface:
//! - [`ExactEwTracker`]: exact counters per key, linear memory.
//! - [`CountMinSketch`]: fixed-size read and write count-min sketches.
//! - [`TopKSketch`]: exact counters for the hottest keys, count-min for the rest.

mod cms;
mod exact;
mod topk;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::freshmodel::{decide_from_ew, CostParams};
use crate::workload::{Event, Key, Op};

pub use cms::{CountMinSketch, RowHash};
pub use exact::{ExactCounters, ExactEwTracker, EXACT_ENTRY_BYTES};
pub use topk::{TopKSketch, TOPK_ENTRY_BYTES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SketchError {
    #[error("sketch dimensions must be positive (depth {depth}, width {width})")]
    EmptySketch { depth: usize, width: usize },
    #[error("no key has both reads and writes; agreement is undefined")]
    NoEligibleKeys,
    #[error("bad estimator descriptor `{0}`")]
    BadDescriptor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RwCounts {
    pub reads: u64,
    pub writes: u64,
}

impl RwCounts {
    pub fn total(&self) -> u64 {
        self.reads + self.writes
    }

    pub(crate) fn bump(&mut self, op: Op) {
        match op {
            Op::Read => self.reads += 1,
            Op::Write => self.writes += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tier {
    Exact,
    TopK,
    CountMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EwEstimate {
    /// `writes / max(reads, 1)`; the canonical estimate for decisions.
    pub value: f64,
    /// Mean of the per-read write-run samples; exact tier only, `None` before the first sample.
    pub sample_mean: Option<f64>,
    pub tier: Tier,
    /// Observations behind the estimate (reads + writes as seen by the tier).
    pub support: u64,
    /// False when no read has been seen, so `value` is a raw write count.
    pub has_reads: bool,
}

impl EwEstimate {
    pub(crate) fn from_counts(counts: RwCounts, tier: Tier) -> Self {
        Self {
            value: counts.writes as f64 / counts.reads.max(1) as f64,
            sample_mean: None,
            tier,
            support: counts.total(),
            has_reads: counts.reads > 0,
        }
    }
}

pub trait RwEstimator: Send + Sync {
    fn record(&mut self, key: Key, op: Op);
    fn counts(&self, key: Key) -> RwCounts;
    fn estimate_ew(&self, key: Key) -> EwEstimate;
    /// Deterministic storage accounting in bytes.
    fn memory_footprint(&self) -> usize;
}

/// Feed every event of a stream to an estimator.
pub fn replay(estimator: &mut dyn RwEstimator, events: &[Event]) {
    for e in events {
        estimator.record(e.key, e.op);
    }
}

/// Fraction of keys (with at least one read and one write in `reference`)
/// for which `estimator` and the exact tracker reach the same update/invalidate decision.
pub fn decision_accuracy(
    estimator: &dyn RwEstimator,
    reference: &ExactEwTracker,
    costs: &CostParams,
) -> Result<f64, SketchError> {
    let (mut eligible, mut agree) = (0u64, 0u64);
    for (key, counters) in reference.iter() {
        if counters.counts.reads == 0 || counters.counts.writes == 0 {
            continue;
        }
        eligible += 1;
        let truth = decide_from_ew(reference.estimate_ew(key).value, costs);
        if decide_from_ew(estimator.estimate_ew(key).value, costs) == truth {
            agree += 1;
        }
    }
    if eligible == 0 {
        return Err(SketchError::NoEligibleKeys);
    }
    Ok(agree as f64 / eligible as f64)
}

/// Estimator selection, written `exact`, `cms:d=4,w=4096` or `topk:k=1000,d=4,w=4096`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum SketchConfig {
    #[default]
    Exact,
    CountMin {
        depth: usize,
        width: usize,
    },
    TopK {
        k: usize,
        depth: usize,
        width: usize,
    },
}

impl SketchConfig {
    pub fn build(&self, seed: u64) -> Result<Box<dyn RwEstimator>, SketchError> {
        Ok(match *self {
            SketchConfig::Exact => Box::new(ExactEwTracker::new()),
            SketchConfig::CountMin { depth, width } => Box::new(CountMinSketch::new(depth, width, seed)?),
            SketchConfig::TopK { k, depth, width } => Box::new(TopKSketch::new(k, depth, width, seed)?),
        })
    }
}

impl fmt::Display for SketchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SketchConfig::Exact => write!(f, "exact"),
            SketchConfig::CountMin { depth, width } => write!(f, "cms:d={depth},w={width}"),
            SketchConfig::TopK { k, depth, width } => write!(f, "topk:k={k},d={depth},w={width}"),
        }
    }
}

impl FromStr for SketchConfig {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SketchError::BadDescriptor(s.to_string());
        let (name, opts) = s.split_once(':').unwrap_or((s, ""));
        let (mut k, mut depth, mut width) = (None, 4usize, 4096usize);
        for opt in opts.split(',').filter(|o| !o.is_empty()) {
            let (key, value) = opt.split_once('=').ok_or_else(bad)?;
            let value: usize = value.trim().parse().map_err(|_| bad())?;
            match key.trim() {
                "k" => k = Some(value),
                "d" | "depth" => depth = value,
                "w" | "width" => width = value,
                _ => return Err(bad()),
            }
        }
        match name.trim() {
            "exact" if opts.is_empty() => Ok(SketchConfig::Exact),
            "cms" | "count-min" if k.is_none() => Ok(SketchConfig::CountMin { depth, width }),
            "topk" | "top-k" => Ok(SketchConfig::TopK {
                k: k.unwrap_or(1000),
                depth,
                width,
            }),
            _ => Err(bad()),
        }
    }
}
