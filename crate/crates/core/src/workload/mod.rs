//! Request streams: synthetic Poisson/Zipf generators, mixtures, and traces.

mod trace;

use std::fmt;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use trace::{parse_trace, parse_trace_str, TraceFormat};

pub const DEFAULT_KEY_SIZE: u32 = 16;
pub const DEFAULT_VALUE_SIZE: u32 = 128;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error("cannot read trace {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("no events for key {0}")]
    UnknownKey(Key),
    #[error("stream has zero duration")]
    ZeroDuration,
}

/// Opaque key identifier. Generated workloads use the Zipf rank (0 = hottest);
/// traces intern their key strings in order of first appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Key(pub u64);

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub key: Key,
    pub op: Op,
    pub key_size: u32,
    pub value_size: u32,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStream {
    pub events: Vec<Event>,
    /// Length of the observation window in seconds, starting at time 0.
    pub duration: f64,
    /// Original key strings for trace-backed streams, indexed by `Key`.
    pub key_names: Option<Vec<String>>,
}

impl EventStream {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn key_name(&self, key: Key) -> String {
        match &self.key_names {
            Some(names) => names.get(key.0 as usize).cloned().unwrap_or_else(|| key.to_string()),
            None => key.to_string(),
        }
    }

    /// Events restricted to one key, with sequence numbers kept.
    pub fn for_key(&self, key: Key) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.key == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonSpec {
    pub lambda: f64,
    pub read_ratio: f64,
    #[serde(default = "one")]
    pub num_keys: u64,
    #[serde(default = "default_zipf_s")]
    pub zipf_s: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_key_size")]
    pub key_size: u32,
    #[serde(default = "default_value_size")]
    pub value_size: u32,
}

fn one() -> u64 {
    1
}

fn default_zipf_s() -> f64 {
    1.3
}

fn default_key_size() -> u32 {
    DEFAULT_KEY_SIZE
}

fn default_value_size() -> u32 {
    DEFAULT_VALUE_SIZE
}

fn default_true() -> bool {
    true
}

impl PoissonSpec {
    pub fn new(lambda: f64, read_ratio: f64, num_keys: u64, duration: f64, seed: u64) -> Self {
        Self {
            lambda,
            read_ratio,
            num_keys,
            zipf_s: default_zipf_s(),
            duration,
            seed,
            key_size: DEFAULT_KEY_SIZE,
            value_size: DEFAULT_VALUE_SIZE,
        }
    }

    pub fn with_zipf(mut self, s: f64) -> Self {
        self.zipf_s = s;
        self
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::Invalid(msg));
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.read_ratio) {
            return bad(format!("read_ratio must lie in [0, 1], got {}", self.read_ratio));
        }
        if self.num_keys == 0 {
            return bad("num_keys must be at least 1".into());
        }
        if !(self.zipf_s.is_finite() && self.zipf_s > 0.0) {
            return bad(format!("zipf_s must be positive, got {}", self.zipf_s));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.key_size == 0 {
            return bad("key_size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub spec: PoissonSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
    /// Give each component its own key range (default). When false every
    /// component draws from the same ranks.
    #[serde(default = "default_true")]
    pub disjoint_keys: bool,
}

impl MixtureSpec {
    /// Equal-weight mix of a read-heavy and a write-heavy population.
    pub fn read_write_split(lambda: f64, keys_each: u64, duration: f64, seed: u64) -> Self {
        let part = |r: f64, s: u64| MixtureComponent {
            weight: 0.5,
            spec: PoissonSpec::new(lambda, r, keys_each, duration, s),
        };
        Self {
            components: vec![part(0.9, seed), part(0.1, seed.wrapping_add(1))],
            disjoint_keys: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSpec {
    Poisson(PoissonSpec),
    Mixture(MixtureSpec),
    Trace { path: PathBuf },
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        match self {
            WorkloadSpec::Poisson(p) => p.validate(),
            WorkloadSpec::Mixture(m) => {
                if m.components.is_empty() {
                    return Err(WorkloadError::Invalid("mixture has no components".into()));
                }
                let mut total = 0.0;
                for c in &m.components {
                    if !(c.weight.is_finite() && c.weight > 0.0) {
                        return Err(WorkloadError::Invalid(format!(
                            "mixture weights must be positive, got {}",
                            c.weight
                        )));
                    }
                    c.spec.validate()?;
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(WorkloadError::Invalid(format!("mixture weights sum to {total}, not 1")));
                }
                Ok(())
            }
            WorkloadSpec::Trace { .. } => Ok(()),
        }
    }

    /// Replace every generator seed, deriving per-component seeds from `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            WorkloadSpec::Poisson(p) => WorkloadSpec::Poisson(PoissonSpec { seed, ..p.clone() }),
            WorkloadSpec::Mixture(m) => WorkloadSpec::Mixture(MixtureSpec {
                components: m
                    .components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| MixtureComponent {
                        weight: c.weight,
                        spec: PoissonSpec {
                            seed: seed.wrapping_add(i as u64),
                            ..c.spec.clone()
                        },
                    })
                    .collect(),
                disjoint_keys: m.disjoint_keys,
            }),
            WorkloadSpec::Trace { path } => WorkloadSpec::Trace { path: path.clone() },
        }
    }
}

/// Exact Zipf sampler over ranks `0..n` with `P(rank i) ∝ (i + 1)^-s`.
#[derive(Debug, Clone)]
pub struct ZipfTable {
    cumulative: Vec<f64>,
}

impl ZipfTable {
    pub fn new(num_keys: u64, s: f64) -> Self {
        let mut cumulative = Vec::with_capacity(num_keys as usize);
        let mut acc = 0.0;
        for rank in 1..=num_keys {
            acc += (rank as f64).powf(-s);
            cumulative.push(acc);
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self { cumulative }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Normalized probability of the 0-based `rank`.
    pub fn mass(&self, rank: usize) -> f64 {
        match rank {
            0 => self.cumulative[0],
            _ => self.cumulative[rank] - self.cumulative[rank - 1],
        }
    }

    /// Map a uniform draw in `[0, 1)` to a rank.
    pub fn sample(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Materialize the event stream for `spec`. Identical specs produce identical streams.
pub fn generate(spec: &WorkloadSpec) -> Result<EventStream, WorkloadError> {
    spec.validate()?;
    match spec {
        WorkloadSpec::Poisson(p) => {
            let mut events = Vec::new();
            poisson_events(p, p.lambda, 0, &mut events);
            for (i, e) in events.iter_mut().enumerate() {
                e.seq = i as u64;
            }
            Ok(EventStream {
                events,
                duration: p.duration,
                key_names: None,
            })
        }
        WorkloadSpec::Mixture(m) => Ok(generate_mixture(m)),
        WorkloadSpec::Trace { path } => parse_trace(path, &TraceFormat::default()),
    }
}

fn poisson_events(spec: &PoissonSpec, rate: f64, key_offset: u64, out: &mut Vec<Event>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gaps = Exp::new(rate).expect("rate validated positive");
    let zipf = ZipfTable::new(spec.num_keys, spec.zipf_s);
    let mut time = 0.0;
    loop {
        time += gaps.sample(&mut rng);
        if time >= spec.duration {
            break;
        }
        let op = if rng.random::<f64>() < spec.read_ratio {
            Op::Read
        } else {
            Op::Write
        };
        let rank = zipf.sample(rng.random::<f64>());
        out.push(Event {
            time,
            key: Key(key_offset + rank as u64),
            op,
            key_size: spec.key_size,
            value_size: spec.value_size,
            seq: out.len() as u64,
        });
    }
}

fn generate_mixture(m: &MixtureSpec) -> EventStream {
    let mut tagged = Vec::new();
    let mut offset = 0;
    let mut duration: f64 = 0.0;
    for (component, c) in m.components.iter().enumerate() {
        let mut events = Vec::new();
        poisson_events(&c.spec, c.spec.lambda * c.weight, offset, &mut events);
        tagged.extend(events.into_iter().map(|e| (component, e)));
        if m.disjoint_keys {
            offset += c.spec.num_keys;
        }
        duration = duration.max(c.spec.duration);
    }
    // Component streams are already time-ordered; (time, component, local seq)
    // is a total order that keeps each component's relative order.
    tagged.sort_by(|(ca, a), (cb, b)| a.time.total_cmp(&b.time).then(ca.cmp(cb)).then(a.seq.cmp(&b.seq)));
    let events = tagged
        .into_iter()
        .enumerate()
        .map(|(i, (_, e))| Event { seq: i as u64, ..e })
        .collect();
    EventStream {
        events,
        duration,
        key_names: None,
    }
}

/// Empirical request rate and read fraction of one key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRates {
    pub lambda: f64,
    pub read_ratio: f64,
    pub count: u64,
}

pub fn estimate_key_params(stream: &EventStream, key: Key) -> Result<KeyRates, WorkloadError> {
    let (mut count, mut reads) = (0u64, 0u64);
    for e in stream.for_key(key) {
        count += 1;
        if e.op == Op::Read {
            reads += 1;
        }
    }
    if count == 0 {
        return Err(WorkloadError::UnknownKey(key));
    }
    if stream.duration <= 0.0 {
        return Err(WorkloadError::ZeroDuration);
    }
    Ok(KeyRates {
        lambda: count as f64 / stream.duration,
        read_ratio: reads as f64 / count as f64,
        count,
    })
}
