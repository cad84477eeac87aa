//! Freshness policies as interval-batch deciders.
//!
//! At every interval boundary the store hands its dirty keys to the policy,
//! which answers with one [`PolicyAction`] per key. TTL policies act through
//! the cache's per-entry hooks instead and always answer `DoNothing`.

mod engine;
mod opt;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::freshmodel::{
    decide_from_ew, decide_throughput, decide_with_slo, CostParams, Decision, ModelError, ModelParams, ThresholdMode,
};
use crate::simcore::interval_of;
use crate::sketch::{RwEstimator, SketchConfig, SketchError};
use crate::workload::Key;

pub use engine::{CacheView, PolicyEngine};
pub use opt::{
    interval_summaries, opt_decide, opt_decide_key, opt_oracle_dp, schedule_cost, FutureReads, IntervalSummary,
    KeySchedule, OptSchedule, MAX_ORACLE_INTERVALS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("bad policy descriptor `{0}`")]
    BadDescriptor(String),
    #[error("policy `{0}` needs a per-key estimator")]
    MissingEstimator(String),
    #[error("sequence of {len} intervals exceeds the oracle limit of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("schedule leaves a stale copy in front of a read at interval {0}")]
    InfeasibleSchedule(usize),
    #[error("schedule has {got} actions for {intervals} intervals")]
    ScheduleLength { got: usize, intervals: usize },
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PolicyAction {
    SendUpdate,
    SendInvalidate,
    DoNothing,
}

impl From<Decision> for PolicyAction {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Update => PolicyAction::SendUpdate,
            Decision::Invalidate => PolicyAction::SendInvalidate,
        }
    }
}

/// Where Adaptive gets its per-key statistic from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum EstimatorMode {
    /// `E[W]` as the writes/reads ratio, fed to `decide_from_ew`.
    #[default]
    Ew,
    /// Per-key `(lambda, r)` fed to the throughput threshold.
    Rates,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AdaptiveOptions {
    pub estimator: EstimatorMode,
    pub slo: Option<f64>,
    pub sketch: SketchConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PolicyDescriptor {
    TtlExpiry,
    TtlPolling,
    AlwaysUpdate,
    AlwaysInvalidate,
    Adaptive(AdaptiveOptions),
    AdaptiveCs(AdaptiveOptions),
    Opt,
}

impl PolicyDescriptor {
    /// The seven policies with default options, in reporting order.
    pub const ALL: [PolicyDescriptor; 7] = [
        PolicyDescriptor::TtlExpiry,
        PolicyDescriptor::TtlPolling,
        PolicyDescriptor::AlwaysUpdate,
        PolicyDescriptor::AlwaysInvalidate,
        PolicyDescriptor::Adaptive(AdaptiveOptions {
            estimator: EstimatorMode::Ew,
            slo: None,
            sketch: SketchConfig::Exact,
        }),
        PolicyDescriptor::AdaptiveCs(AdaptiveOptions {
            estimator: EstimatorMode::Ew,
            slo: None,
            sketch: SketchConfig::Exact,
        }),
        PolicyDescriptor::Opt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyDescriptor::TtlExpiry => "ttl-expiry",
            PolicyDescriptor::TtlPolling => "ttl-polling",
            PolicyDescriptor::AlwaysUpdate => "update",
            PolicyDescriptor::AlwaysInvalidate => "invalidate",
            PolicyDescriptor::Adaptive(_) => "adaptive",
            PolicyDescriptor::AdaptiveCs(_) => "adaptive-cs",
            PolicyDescriptor::Opt => "opt",
        }
    }

    pub fn is_ttl(&self) -> bool {
        matches!(self, PolicyDescriptor::TtlExpiry | PolicyDescriptor::TtlPolling)
    }

    pub fn adaptive_options(&self) -> Option<&AdaptiveOptions> {
        match self {
            PolicyDescriptor::Adaptive(o) | PolicyDescriptor::AdaptiveCs(o) => Some(o),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        let Some(o) = self.adaptive_options() else {
            return Ok(());
        };
        let mut opts = Vec::new();
        if o.estimator == EstimatorMode::Rates {
            opts.push("estimator=rates".to_string());
        }
        if let Some(slo) = o.slo {
            opts.push(format!("slo={slo}"));
        }
        match o.sketch {
            SketchConfig::Exact => {}
            SketchConfig::CountMin { depth, width } => opts.push(format!("sketch=cms,d={depth},w={width}")),
            SketchConfig::TopK { k, depth, width } => opts.push(format!("sketch=topk,k={k},d={depth},w={width}")),
        }
        if !opts.is_empty() {
            write!(f, ":{}", opts.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for PolicyDescriptor {
    type Err = PolicyError;

    /// `adaptive:estimator=rates,slo=0.05,sketch=topk,k=100` and friends.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PolicyError::BadDescriptor(s.to_string());
        let (name, opts) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let simple = match name {
            "ttl-expiry" => Some(PolicyDescriptor::TtlExpiry),
            "ttl-polling" => Some(PolicyDescriptor::TtlPolling),
            "update" => Some(PolicyDescriptor::AlwaysUpdate),
            "invalidate" => Some(PolicyDescriptor::AlwaysInvalidate),
            "opt" => Some(PolicyDescriptor::Opt),
            "adaptive" | "adaptive-cs" => None,
            _ => return Err(bad()),
        };
        if let Some(p) = simple {
            return if opts.is_empty() { Ok(p) } else { Err(bad()) };
        }

        let mut o = AdaptiveOptions::default();
        let mut sketch_name = "exact";
        let mut sketch_opts = Vec::new();
        for opt in opts.split(',').filter(|o| !o.trim().is_empty()) {
            let (key, value) = opt.split_once('=').ok_or_else(bad)?;
            match key.trim() {
                "estimator" => {
                    o.estimator = match value.trim() {
                        "ew" => EstimatorMode::Ew,
                        "rates" => EstimatorMode::Rates,
                        _ => return Err(bad()),
                    }
                }
                "slo" => {
                    let slo: f64 = value.trim().parse().map_err(|_| bad())?;
                    if !(0.0..=1.0).contains(&slo) {
                        return Err(bad());
                    }
                    o.slo = Some(slo);
                }
                "sketch" => sketch_name = value.trim(),
                "k" | "d" | "w" | "depth" | "width" => sketch_opts.push(opt.trim()),
                _ => return Err(bad()),
            }
        }
        let sketch = if sketch_opts.is_empty() {
            sketch_name.to_string()
        } else {
            format!("{sketch_name}:{}", sketch_opts.join(","))
        };
        o.sketch = sketch.parse().map_err(|_| bad())?;
        Ok(if name == "adaptive" {
            PolicyDescriptor::Adaptive(o)
        } else {
            PolicyDescriptor::AdaptiveCs(o)
        })
    }
}

/// What a policy may consult when deciding a batch.
pub struct PolicyContext<'a> {
    pub costs: CostParams,
    pub staleness_bound: f64,
    /// Boundary time; Adaptive's rate mode divides counts by it.
    pub now: f64,
    pub estimator: Option<&'a dyn RwEstimator>,
    /// Cache residency; consulted by Adaptive+C.S. only.
    pub residency: Option<&'a dyn Fn(Key) -> bool>,
    /// Keys whose cached copy is already invalidated.
    pub invalidated: Option<&'a dyn Fn(Key) -> bool>,
    /// Future reads; consulted by Opt only.
    pub future: Option<&'a FutureReads>,
}

impl<'a> PolicyContext<'a> {
    pub fn new(costs: CostParams, staleness_bound: f64, now: f64) -> Self {
        Self {
            costs,
            staleness_bound,
            now,
            estimator: None,
            residency: None,
            invalidated: None,
            future: None,
        }
    }

    fn is_invalidated(&self, key: Key) -> bool {
        self.invalidated.is_some_and(|f| f(key))
    }
}

/// One action per dirty key.
pub fn decide_batch(
    policy: &PolicyDescriptor,
    dirty_keys: impl IntoIterator<Item = Key>,
    ctx: &PolicyContext<'_>,
) -> Result<BTreeMap<Key, PolicyAction>, PolicyError> {
    let mut out = BTreeMap::new();
    for key in dirty_keys {
        out.insert(key, decide_key(policy, key, ctx)?);
    }
    Ok(out)
}

fn decide_key(policy: &PolicyDescriptor, key: Key, ctx: &PolicyContext<'_>) -> Result<PolicyAction, PolicyError> {
    let invalidate = || {
        if ctx.is_invalidated(key) {
            PolicyAction::DoNothing
        } else {
            PolicyAction::SendInvalidate
        }
    };
    Ok(match policy {
        PolicyDescriptor::TtlExpiry | PolicyDescriptor::TtlPolling => PolicyAction::DoNothing,
        PolicyDescriptor::AlwaysUpdate => PolicyAction::SendUpdate,
        PolicyDescriptor::AlwaysInvalidate => invalidate(),
        PolicyDescriptor::Adaptive(o) | PolicyDescriptor::AdaptiveCs(o) => {
            if matches!(policy, PolicyDescriptor::AdaptiveCs(_)) && !ctx.residency.is_some_and(|f| f(key)) {
                return Ok(PolicyAction::DoNothing);
            }
            let estimator = ctx
                .estimator
                .ok_or_else(|| PolicyError::MissingEstimator(policy.to_string()))?;
            match adaptive_decision(o, estimator, key, ctx)? {
                Some(Decision::Update) => PolicyAction::SendUpdate,
                Some(Decision::Invalidate) | None => invalidate(),
            }
        }
        PolicyDescriptor::Opt => match ctx.future.and_then(|f| f.next_read(key, ctx.now)) {
            Some(t) if interval_of(t, ctx.staleness_bound) <= interval_of(ctx.now, ctx.staleness_bound) => {
                if ctx.costs.update() <= ctx.costs.invalidate() + ctx.costs.miss() {
                    PolicyAction::SendUpdate
                } else {
                    invalidate()
                }
            }
            _ => PolicyAction::DoNothing,
        },
    })
}

/// `None` while the key has no reads yet (warm-up).
fn adaptive_decision(
    o: &AdaptiveOptions,
    estimator: &dyn RwEstimator,
    key: Key,
    ctx: &PolicyContext<'_>,
) -> Result<Option<Decision>, PolicyError> {
    let counts = estimator.counts(key);
    if counts.reads == 0 {
        return Ok(None);
    }
    let rates = || -> Result<Option<ModelParams>, PolicyError> {
        if ctx.now <= 0.0 {
            return Ok(None);
        }
        let total = counts.total() as f64;
        Ok(Some(ModelParams::new(
            total / ctx.now,
            counts.reads as f64 / total,
            ctx.staleness_bound,
        )?))
    };
    if let Some(slo) = o.slo {
        return match rates()? {
            Some(p) => Ok(Some(decide_with_slo(&p, &ctx.costs, slo)?)),
            None => Ok(None),
        };
    }
    Ok(match o.estimator {
        EstimatorMode::Ew => Some(decide_from_ew(estimator.estimate_ew(key).value, &ctx.costs)),
        EstimatorMode::Rates => rates()?.map(|p| decide_throughput(&p, &ctx.costs, ThresholdMode::PaperThreshold)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::ExactEwTracker;
    use crate::workload::Op;

    fn costs() -> CostParams {
        CostParams::new(0.2, 0.1, 1.0).unwrap()
    }

    fn adaptive() -> PolicyDescriptor {
        "adaptive".parse().unwrap()
    }

    #[test]
    fn descriptor_strings() {
        for s in [
            "ttl-expiry",
            "ttl-polling",
            "update",
            "invalidate",
            "adaptive",
            "adaptive-cs",
            "opt",
            "adaptive:estimator=rates",
            "adaptive:slo=0.05",
            "adaptive-cs:estimator=rates,slo=0.1,sketch=topk,k=10,d=2,w=64",
            "adaptive:sketch=cms,d=4,w=1024",
        ] {
            let p: PolicyDescriptor = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        for s in [
            "lru",
            "update:x=1",
            "adaptive:estimator=foo",
            "adaptive:slo=2",
            "adaptive:sketch=bloom",
        ] {
            assert!(s.parse::<PolicyDescriptor>().is_err(), "{s}");
        }
        assert_eq!(PolicyDescriptor::ALL.map(|p| p.to_string())[4], "adaptive");
    }

    #[test]
    fn invalidate_skips_already_invalidated_keys() {
        let is_inv = |k: Key| k == Key(1);
        let mut ctx = PolicyContext::new(costs(), 1.0, 1.0);
        ctx.invalidated = Some(&is_inv);
        let out = decide_batch(&PolicyDescriptor::AlwaysInvalidate, [Key(1), Key(2)], &ctx).unwrap();
        assert_eq!(out[&Key(1)], PolicyAction::DoNothing);
        assert_eq!(out[&Key(2)], PolicyAction::SendInvalidate);
    }

    #[test]
    fn baselines_and_ttl() {
        let ctx = PolicyContext::new(costs(), 1.0, 1.0);
        let keys = [Key(3), Key(4)];
        let up = decide_batch(&PolicyDescriptor::AlwaysUpdate, keys, &ctx).unwrap();
        assert!(up.values().all(|a| *a == PolicyAction::SendUpdate));
        for ttl in [PolicyDescriptor::TtlExpiry, PolicyDescriptor::TtlPolling] {
            let out = decide_batch(&ttl, keys, &ctx).unwrap();
            assert!(out.values().all(|a| *a == PolicyAction::DoNothing));
        }
    }

    #[test]
    fn adaptive_follows_ew_estimate() {
        // E[W] = 3 writes / 10 reads = 0.3; 0.3 * 0.2 = 0.06 < 1.1.
        let mut est = ExactEwTracker::new();
        for i in 0..13 {
            est.record(Key(5), if i < 3 { Op::Write } else { Op::Read });
        }
        // 60 writes per read: 12 > 1.1.
        for _ in 0..600 {
            est.record(Key(6), Op::Write);
        }
        for _ in 0..10 {
            est.record(Key(6), Op::Read);
        }
        let mut ctx = PolicyContext::new(costs(), 1.0, 1.0);
        ctx.estimator = Some(&est);
        assert_eq!(
            decide_batch(&adaptive(), [Key(5)], &ctx).unwrap()[&Key(5)],
            PolicyAction::SendUpdate
        );
        assert_eq!(
            decide_batch(&adaptive(), [Key(6)], &ctx).unwrap()[&Key(6)],
            PolicyAction::SendInvalidate
        );
    }

    #[test]
    fn adaptive_warm_up_and_missing_estimator() {
        let est = ExactEwTracker::new();
        let mut ctx = PolicyContext::new(costs(), 1.0, 1.0);
        assert!(matches!(
            decide_batch(&adaptive(), [Key(0)], &ctx),
            Err(PolicyError::MissingEstimator(_))
        ));
        ctx.estimator = Some(&est);
        assert_eq!(
            decide_batch(&adaptive(), [Key(0)], &ctx).unwrap()[&Key(0)],
            PolicyAction::SendInvalidate
        );
    }

    #[test]
    fn adaptive_cs_ignores_non_resident_keys() {
        let mut est = ExactEwTracker::new();
        est.record(Key(0), Op::Read);
        est.record(Key(0), Op::Write);
        let resident = |k: Key| k == Key(1);
        let mut ctx = PolicyContext::new(costs(), 1.0, 1.0);
        ctx.estimator = Some(&est);
        ctx.residency = Some(&resident);
        let cs: PolicyDescriptor = "adaptive-cs".parse().unwrap();
        assert_eq!(
            decide_batch(&cs, [Key(0)], &ctx).unwrap()[&Key(0)],
            PolicyAction::DoNothing
        );
    }

    #[test]
    fn rates_and_slo_modes() {
        // 9 reads, 1 write over 1 s: r = 0.9, lambda = 10.
        let mut est = ExactEwTracker::new();
        est.record(Key(0), Op::Write);
        for _ in 0..9 {
            est.record(Key(0), Op::Read);
        }
        let mut ctx = PolicyContext::new(costs(), 0.01, 1.0);
        ctx.estimator = Some(&est);
        let rates: PolicyDescriptor = "adaptive:estimator=rates".parse().unwrap();
        assert_eq!(
            decide_batch(&rates, [Key(0)], &ctx).unwrap()[&Key(0)],
            PolicyAction::SendUpdate
        );

        // Updates too expensive for throughput, but invalidation would miss ~10% of reads.
        ctx.costs = CostParams::new(5.0, 0.1, 1.0).unwrap();
        assert_eq!(
            decide_batch(&rates, [Key(0)], &ctx).unwrap()[&Key(0)],
            PolicyAction::SendInvalidate
        );
        let slo: PolicyDescriptor = "adaptive:slo=0.05".parse().unwrap();
        assert_eq!(
            decide_batch(&slo, [Key(0)], &ctx).unwrap()[&Key(0)],
            PolicyAction::SendUpdate
        );
        let loose: PolicyDescriptor = "adaptive:slo=0.5".parse().unwrap();
        assert_eq!(
            decide_batch(&loose, [Key(0)], &ctx).unwrap()[&Key(0)],
            PolicyAction::SendInvalidate
        );
    }

    #[test]
    fn opt_updates_only_before_a_read_interval() {
        let future = FutureReads::from_events(&[crate::workload::Event {
            time: 2.5,
            key: Key(0),
            op: Op::Read,
            key_size: 16,
            value_size: 128,
            seq: 0,
        }]);
        let mut ctx = PolicyContext::new(costs(), 1.0, 1.0);
        ctx.future = Some(&future);
        assert_eq!(
            decide_batch(&PolicyDescriptor::Opt, [Key(0), Key(1)], &ctx).unwrap(),
            BTreeMap::from([(Key(0), PolicyAction::DoNothing), (Key(1), PolicyAction::DoNothing)])
        );
        ctx.now = 2.0;
        assert_eq!(
            decide_batch(&PolicyDescriptor::Opt, [Key(0)], &ctx).unwrap()[&Key(0)],
            PolicyAction::SendUpdate
        );
    }
}
