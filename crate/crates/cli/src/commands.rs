use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use freshlab::freshmodel::{
    decide_throughput, decide_with_slo, CostParams, Decision, ModelParams, ModelPolicy, PolicyCosts, ThresholdMode,
};
use freshlab::policies::PolicyDescriptor;
use freshlab::simcore::{audit_staleness, run_detailed, KeyMetrics, SimConfig, TranscriptRecord};
use freshlab::sketch::{decision_accuracy, replay, ExactEwTracker, SketchConfig};
use freshlab::workload::{generate, EventStream, Key, MixtureSpec, PoissonSpec, WorkloadSpec, ZipfTable};

use crate::config::{check_t_values, ExperimentConfig, Horizon};
use crate::output::{self, file_token, num, Count, MetricsRow, ModelColumns, SketchRow};
use crate::CliError;

/// One key's request rate and read fraction, as the closed forms see it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyClass {
    pub lambda: f64,
    pub read_ratio: f64,
}

/// Per-key rates implied by a synthetic workload; traces have none.
pub fn key_classes(spec: &WorkloadSpec) -> Option<Vec<KeyClass>> {
    fn expand(p: &PoissonSpec, rate: f64, out: &mut Vec<KeyClass>) {
        let zipf = ZipfTable::new(p.num_keys, p.zipf_s);
        out.extend((0..zipf.len()).map(|rank| KeyClass {
            lambda: rate * zipf.mass(rank),
            read_ratio: p.read_ratio,
        }));
    }
    let mut out = Vec::new();
    match spec {
        WorkloadSpec::Poisson(p) => expand(p, p.lambda, &mut out),
        WorkloadSpec::Mixture(MixtureSpec { components, .. }) => {
            for c in components {
                expand(&c.spec, c.spec.lambda * c.weight, &mut out);
            }
        }
        WorkloadSpec::Trace { .. } => return None,
    }
    Some(out)
}

/// Closed-form totals for `policy` summed over `keys`; `None` if the policy has no closed form.
pub fn model_columns(
    keys: &[KeyClass],
    policy: &PolicyDescriptor,
    costs: &CostParams,
    t: f64,
    horizon: f64,
) -> Result<Option<(ModelColumns, f64, f64)>, CliError> {
    let fixed = match policy {
        PolicyDescriptor::TtlExpiry => Some(ModelPolicy::TtlExpiry),
        PolicyDescriptor::TtlPolling => Some(ModelPolicy::TtlPolling),
        PolicyDescriptor::AlwaysUpdate => Some(ModelPolicy::Update),
        PolicyDescriptor::AlwaysInvalidate => Some(ModelPolicy::Invalidate),
        PolicyDescriptor::Adaptive(_) => None,
        PolicyDescriptor::AdaptiveCs(_) | PolicyDescriptor::Opt => return Ok(None),
    };
    let slo = policy.adaptive_options().and_then(|o| o.slo);

    let (mut total, mut reads, mut writes) = (PolicyCosts::default(), 0.0, 0.0);
    for k in keys {
        let p = ModelParams::new(k.lambda, k.read_ratio, t)
            .and_then(|p| p.with_horizon(horizon))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let chosen = match fixed {
            Some(m) => m,
            None => {
                let decision = match slo {
                    Some(s) => decide_with_slo(&p, costs, s).map_err(|e| CliError::Usage(e.to_string()))?,
                    None => decide_throughput(&p, costs, ThresholdMode::PaperThreshold),
                };
                match decision {
                    Decision::Update => ModelPolicy::Update,
                    Decision::Invalidate => ModelPolicy::Invalidate,
                }
            }
        };
        let c = chosen.costs(&p, costs);
        total.freshness_cost += c.freshness_cost;
        total.staleness_cost += c.staleness_cost;
        reads += p.expected_reads();
        writes += p.expected_writes();
    }
    let useful = reads * costs.serve();
    let cols = ModelColumns {
        model_c_f: total.freshness_cost,
        model_c_s: total.staleness_cost,
        model_c_f_norm: (useful > 0.0).then(|| total.freshness_cost / useful),
        model_c_s_norm: (reads > 0.0).then(|| total.staleness_cost / reads),
    };
    Ok(Some((cols, reads, writes)))
}

/// Inputs of the `model` command.
#[derive(Debug, Clone)]
pub struct ModelRequest {
    pub keys: Vec<KeyClass>,
    pub costs: CostParams,
    pub policies: Vec<PolicyDescriptor>,
    pub t_values: Vec<f64>,
    pub horizon: Horizon,
}

impl ModelRequest {
    /// A single key with the given rate and read ratio.
    pub fn single_key(lambda: f64, read_ratio: f64, costs: CostParams) -> Self {
        Self {
            keys: vec![KeyClass { lambda, read_ratio }],
            costs,
            policies: Vec::new(),
            t_values: Vec::new(),
            horizon: Horizon::Workload,
        }
    }
}

/// One row per (T, policy). The horizon defaults to a single interval (T' = T).
pub fn cmd_model(req: &ModelRequest) -> Result<Vec<MetricsRow>, CliError> {
    if req.policies.is_empty() {
        return Err(CliError::Usage("no policies given".into()));
    }
    check_t_values(&req.t_values)?;
    if req.keys.is_empty() {
        return Err(CliError::Usage("workload has no keys".into()));
    }
    let mut rows = Vec::new();
    for &t in &req.t_values {
        let horizon = match req.horizon {
            Horizon::Workload => t,
            Horizon::Seconds(h) => h,
            Horizon::Intervals(n) => n * t,
        };
        for policy in &req.policies {
            let Some((m, reads, writes)) = model_columns(&req.keys, policy, &req.costs, t, horizon)? else {
                return Err(CliError::Usage(format!("policy `{policy}` has no closed form")));
            };
            rows.push(MetricsRow {
                t,
                policy: policy.to_string(),
                c_f: m.model_c_f,
                c_s: m.model_c_s,
                c_f_norm: m.model_c_f_norm,
                c_s_norm: m.model_c_s_norm,
                reads: Count::Expected(reads),
                writes: Count::Expected(writes),
                stale_misses: Count::Expected(m.model_c_s),
                cold_misses: None,
                model: None,
            });
        }
    }
    Ok(rows)
}

/// Everything one simulated (T, policy) point produced.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub row: MetricsRow,
    pub violations: usize,
    pub transcript: Option<Vec<TranscriptRecord>>,
    pub per_key: Option<BTreeMap<Key, KeyMetrics>>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub points: Vec<PointResult>,
}

impl GridOutcome {
    pub fn rows(&self) -> Vec<MetricsRow> {
        self.points.iter().map(|p| p.row.clone()).collect()
    }

    pub fn violations(&self) -> usize {
        self.points.iter().map(|p| p.violations).sum()
    }
}

fn with_duration(spec: &WorkloadSpec, duration: f64) -> WorkloadSpec {
    match spec {
        WorkloadSpec::Poisson(p) => WorkloadSpec::Poisson(PoissonSpec { duration, ..p.clone() }),
        WorkloadSpec::Mixture(m) => {
            let mut m = m.clone();
            for c in &mut m.components {
                c.spec.duration = duration;
            }
            WorkloadSpec::Mixture(m)
        }
        WorkloadSpec::Trace { .. } => spec.clone(),
    }
}

fn materialize(spec: &WorkloadSpec, duration: Option<f64>) -> Result<EventStream, CliError> {
    let runtime = |e: freshlab::workload::WorkloadError| CliError::Runtime(e.to_string());
    let Some(d) = duration else {
        return generate(spec).map_err(runtime);
    };
    let mut stream = generate(&with_duration(spec, d)).map_err(runtime)?;
    if matches!(spec, WorkloadSpec::Trace { .. }) {
        stream.events.retain(|e| e.time < d);
    }
    stream.duration = d;
    Ok(stream)
}

/// Simulate every (T, policy) pair of `cfg`, optionally with closed-form columns.
pub fn run_grid(cfg: &ExperimentConfig, with_model: bool) -> Result<GridOutcome, CliError> {
    cfg.check_sim_inputs()?;
    let costs = cfg.cost_params()?;
    let spec = cfg
        .seeded_workload()
        .ok_or_else(|| CliError::Usage("a [workload] section is required".into()))?;
    let seed = cfg.seed.unwrap_or(0);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    // One stream per distinct horizon.
    let durations: Vec<Option<f64>> = cfg
        .t_values
        .iter()
        .map(|&t| match cfg.horizon {
            Horizon::Workload => None,
            Horizon::Seconds(h) => Some(h),
            Horizon::Intervals(n) => Some(n * t),
        })
        .collect();
    let mut distinct: Vec<Option<f64>> = Vec::new();
    for d in &durations {
        if !distinct.iter().any(|x| x.map(f64::to_bits) == d.map(f64::to_bits)) {
            distinct.push(*d);
        }
    }
    let streams: Vec<Arc<EventStream>> = pool.install(|| {
        distinct
            .par_iter()
            .map(|d| materialize(&spec, *d).map(Arc::new))
            .collect::<Result<_, _>>()
    })?;
    let stream_for = |i: usize| {
        let pos = distinct
            .iter()
            .position(|x| x.map(f64::to_bits) == durations[i].map(f64::to_bits))
            .expect("every duration is listed");
        Arc::clone(&streams[pos])
    };

    let keys = if with_model { key_classes(&spec) } else { None };
    let mut jobs = Vec::new();
    for (ti, &t) in cfg.t_values.iter().enumerate() {
        for policy in &cfg.policies {
            jobs.push((t, *policy, stream_for(ti)));
        }
    }

    let points = pool.install(|| {
        jobs.par_iter()
            .map(|(t, policy, stream)| {
                let sim = SimConfig::new(*t, cfg.cache_capacity, costs, *policy)
                    .with_seed(seed)
                    .with_ttl_clock(cfg.ttl_clock)
                    .with_transcript(cfg.transcript)
                    .with_audit(true);
                let out =
                    run_detailed(stream, &sim).map_err(|e| CliError::Runtime(format!("{policy} at T={t}: {e}")))?;
                let violations = audit_staleness(out.audit.as_ref().expect("audit requested"), *t).len();
                let m = &out.metrics;
                let model = match &keys {
                    Some(k) => model_columns(k, policy, &costs, *t, stream.duration)?.map(|(c, _, _)| c),
                    None => None,
                };
                Ok(PointResult {
                    row: MetricsRow {
                        t: *t,
                        policy: policy.to_string(),
                        c_f: m.freshness_cost,
                        c_s: m.stale_misses as f64,
                        c_f_norm: m.normalized_freshness(&costs).ok(),
                        c_s_norm: m.normalized_staleness().ok(),
                        reads: Count::Observed(m.reads_total),
                        writes: Count::Observed(m.writes_total),
                        stale_misses: Count::Observed(m.stale_misses),
                        cold_misses: Some(Count::Observed(m.cold_or_capacity_misses)),
                        model,
                    },
                    violations,
                    transcript: out.transcript,
                    per_key: cfg.per_key.then(|| out.metrics.per_key.clone()),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    Ok(GridOutcome { points })
}

/// Write the grid's tables (plus transcripts and per-key tables when asked)
/// and fail with the audit code if any read broke the staleness bound.
pub fn emit_grid(cfg: &ExperimentConfig, stem: &str, grid: &GridOutcome) -> Result<Vec<PathBuf>, CliError> {
    let mut files = output::write_metrics(&cfg.out_dir, stem, cfg.format, &grid.rows())?;
    for p in &grid.points {
        let tag = format!("{}_T{}", file_token(&p.row.policy), file_token(&num(p.row.t)));
        if let Some(records) = &p.transcript {
            let mut text = String::from("event_seq,time,key,kind,detail\n");
            for r in records {
                text.push_str(&r.to_string());
                text.push('\n');
            }
            let path = cfg.out_dir.join(format!("transcript_{tag}.csv"));
            std::fs::write(&path, text)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
            files.push(path);
        }
        if let Some(per_key) = &p.per_key {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Runtime(e.to_string());
            w.write_record([
                "key",
                "reads",
                "writes",
                "hits",
                "stale_misses",
                "cold_misses",
                "freshness_cost",
            ])
            .map_err(io)?;
            for (key, k) in per_key {
                w.write_record([
                    key.to_string(),
                    k.reads.to_string(),
                    k.writes.to_string(),
                    k.hits.to_string(),
                    k.stale_misses.to_string(),
                    k.cold_misses.to_string(),
                    num(k.freshness_cost),
                ])
                .map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
            let path = cfg.out_dir.join(format!("per_key_{tag}.csv"));
            std::fs::write(&path, bytes)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
            files.push(path);
        }
    }
    match grid.violations() {
        0 => Ok(files),
        n => Err(CliError::Audit { violations: n }),
    }
}

/// Agreement with the exact tracker, footprint and (optionally) record cost per estimator.
pub fn cmd_sketch_bench(
    stream: &EventStream,
    estimators: &[SketchConfig],
    costs: &CostParams,
    seed: u64,
    timing: bool,
) -> Result<Vec<SketchRow>, CliError> {
    if estimators.len() < 2 {
        return Err(CliError::Usage(format!(
            "sketch-bench compares at least two estimators, got {}",
            estimators.len()
        )));
    }
    let mut reference = ExactEwTracker::new();
    replay(&mut reference, &stream.events);

    let mut rows = Vec::with_capacity(estimators.len());
    for cfg in estimators {
        let mut est = cfg.build(seed).map_err(|e| CliError::Usage(e.to_string()))?;
        let start = Instant::now();
        replay(est.as_mut(), &stream.events);
        let elapsed = start.elapsed();
        let agreement =
            decision_accuracy(est.as_ref(), &reference, costs).map_err(|e| CliError::Runtime(e.to_string()))?;
        rows.push(SketchRow {
            estimator: cfg.to_string(),
            keys: reference.len() as u64,
            events: stream.len() as u64,
            agreement,
            bytes: est.memory_footprint() as u64,
            ns_per_record: (timing && !stream.is_empty()).then(|| elapsed.as_nanos() as f64 / stream.len() as f64),
        });
    }
    Ok(rows)
}

/// `sketch-bench` against the config's workload.
pub fn sketch_bench_from_config(cfg: &ExperimentConfig, timing: bool) -> Result<Vec<SketchRow>, CliError> {
    let spec = cfg
        .seeded_workload()
        .ok_or_else(|| CliError::Usage("a [workload] section is required".into()))?;
    if cfg.estimators.len() < 2 {
        return Err(CliError::Usage(format!(
            "sketch-bench compares at least two estimators, got {}",
            cfg.estimators.len()
        )));
    }
    let costs = cfg.cost_params()?;
    let duration = match cfg.horizon {
        Horizon::Seconds(h) => Some(h),
        _ => None,
    };
    let stream = materialize(&spec, duration)?;
    cmd_sketch_bench(&stream, &cfg.estimators, &costs, cfg.seed.unwrap_or(0), timing)
}
