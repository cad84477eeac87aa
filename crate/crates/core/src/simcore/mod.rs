//! Discrete-event simulator of a cache-aside cache in front of a backend store.
//!
//! Writes go to the store, which marks the key dirty. At every boundary
//! `n * T` the store hands its dirty keys to the policy and applies the
//! resulting updates and invalidates before any event stamped `n * T`.
//! Reads hit, stale-miss, or cold-miss; every miss refills the cache.

mod audit;
mod cache;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freshmodel::CostParams;
use crate::policies::{CacheView, PolicyAction, PolicyDescriptor, PolicyEngine, PolicyError};
use crate::workload::{Event, EventStream, Key, Op};

pub use audit::{audit_staleness, AuditLog, RecordKind, ServedRead, TranscriptRecord, Violation};
use cache::Cache;
pub use cache::CacheEntry;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("staleness bound must be positive and finite, got {0}")]
    InvalidStalenessBound(f64),
    #[error("cache capacity must be at least 1")]
    ZeroCapacity,
    #[error("event {index} is out of (time, seq) order")]
    Unsorted { index: usize },
    #[error("event {index} has an invalid timestamp {time}")]
    BadTimestamp { index: usize, time: f64 },
    #[error("{0} is zero; the normalized cost is undefined")]
    EmptyDenominator(&'static str),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// When TTL timers fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TtlClock {
    /// Expiry and polls at the next global boundary `n * T` after a fill.
    #[default]
    Aligned,
    /// Expiry and polls at `fetched_at + k * T` for each entry.
    PerEntry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub staleness_bound: f64,
    pub cache_capacity: usize,
    pub costs: CostParams,
    pub policy: PolicyDescriptor,
    pub seed: u64,
    pub ttl_clock: TtlClock,
    pub record_transcript: bool,
    pub record_audit: bool,
}

impl SimConfig {
    pub fn new(staleness_bound: f64, cache_capacity: usize, costs: CostParams, policy: PolicyDescriptor) -> Self {
        Self {
            staleness_bound,
            cache_capacity,
            costs,
            policy,
            seed: 0,
            ttl_clock: TtlClock::Aligned,
            record_transcript: false,
            record_audit: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ttl_clock(mut self, clock: TtlClock) -> Self {
        self.ttl_clock = clock;
        self
    }

    pub fn with_transcript(mut self, on: bool) -> Self {
        self.record_transcript = on;
        self
    }

    pub fn with_audit(mut self, on: bool) -> Self {
        self.record_audit = on;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.staleness_bound.is_finite() && self.staleness_bound > 0.0) {
            return Err(SimError::InvalidStalenessBound(self.staleness_bound));
        }
        if self.cache_capacity == 0 {
            return Err(SimError::ZeroCapacity);
        }
        Ok(())
    }
}

/// Time of boundary `n`.
pub fn boundary_time(n: u64, staleness_bound: f64) -> f64 {
    n as f64 * staleness_bound
}

/// Index of the last boundary at or before `t`, which is also the index of
/// the interval containing `t`. Consistent with [`boundary_time`] under rounding.
pub fn interval_of(t: f64, staleness_bound: f64) -> u64 {
    if t <= 0.0 {
        return 0;
    }
    let mut n = (t / staleness_bound).floor() as u64;
    if boundary_time(n + 1, staleness_bound) <= t {
        n += 1;
    } else if n > 0 && boundary_time(n, staleness_bound) > t {
        n -= 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KeyMetrics {
    pub reads: u64,
    pub writes: u64,
    pub hits: u64,
    pub stale_misses: u64,
    pub cold_misses: u64,
    pub freshness_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FreshnessMetrics {
    /// C_F in cost units.
    pub freshness_cost: f64,
    /// C_S.
    pub stale_misses: u64,
    pub cold_or_capacity_misses: u64,
    pub hits: u64,
    pub reads_total: u64,
    pub reads_with_resident_object: u64,
    pub writes_total: u64,
    pub updates_sent: u64,
    pub invalidates_sent: u64,
    pub polls: u64,
    pub evictions: u64,
    /// Boundaries passed, including idle ones.
    pub boundaries: u64,
    /// Sum over boundaries of the invalidated-set size after the flush.
    pub invalidated_boundary_sum: u64,
    pub per_key: BTreeMap<Key, KeyMetrics>,
}

impl FreshnessMetrics {
    /// `(C_F', C_S')`.
    pub fn normalize(&self, costs: &CostParams) -> Result<(f64, f64), SimError> {
        Ok((self.normalized_freshness(costs)?, self.normalized_staleness()?))
    }

    pub fn normalized_freshness(&self, costs: &CostParams) -> Result<f64, SimError> {
        let useful = self.reads_total as f64 * costs.serve();
        if useful <= 0.0 {
            return Err(SimError::EmptyDenominator("reads_total"));
        }
        Ok(self.freshness_cost / useful)
    }

    pub fn normalized_staleness(&self) -> Result<f64, SimError> {
        if self.reads_with_resident_object == 0 {
            return Err(SimError::EmptyDenominator("reads_with_resident_object"));
        }
        Ok(self.stale_misses as f64 / self.reads_with_resident_object as f64)
    }

    /// Mean invalidated-set size per boundary; for one key, the fraction of
    /// boundaries at which it sits invalidated.
    pub fn invalidated_fraction(&self) -> Option<f64> {
        (self.boundaries > 0).then(|| self.invalidated_boundary_sum as f64 / self.boundaries as f64)
    }

    fn key(&mut self, key: Key) -> &mut KeyMetrics {
        self.per_key.entry(key).or_default()
    }

    fn charge(&mut self, key: Key, amount: f64) {
        self.freshness_cost += amount;
        self.key(key).freshness_cost += amount;
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub metrics: FreshnessMetrics,
    pub transcript: Option<Vec<TranscriptRecord>>,
    pub audit: Option<AuditLog>,
}

/// Run a stream and return its metrics.
pub fn run(stream: &EventStream, config: &SimConfig) -> Result<FreshnessMetrics, SimError> {
    let quiet = SimConfig {
        record_transcript: false,
        record_audit: false,
        ..config.clone()
    };
    Ok(run_detailed(stream, &quiet)?.metrics)
}

/// Run a stream, keeping the transcript and audit log when the config asks for them.
pub fn run_detailed(stream: &EventStream, config: &SimConfig) -> Result<SimRun, SimError> {
    config.validate()?;
    check_order(&stream.events)?;
    let mut sim = Simulator::new(config, &stream.events)?;
    for e in &stream.events {
        sim.advance_to(e.time)?;
        sim.engine.observe(e.key, e.op);
        match e.op {
            Op::Read => sim.read(e),
            Op::Write => sim.write(e),
        }
    }
    let horizon = stream.duration.max(stream.events.last().map_or(0.0, |e| e.time));
    sim.advance_to(horizon)?;
    sim.finish(horizon);
    Ok(sim.into_run())
}

fn check_order(events: &[Event]) -> Result<(), SimError> {
    for (index, e) in events.iter().enumerate() {
        if !(e.time.is_finite() && e.time >= 0.0) {
            return Err(SimError::BadTimestamp { index, time: e.time });
        }
        if index > 0 {
            let prev = &events[index - 1];
            if e.time < prev.time || (e.time == prev.time && e.seq <= prev.seq) {
                return Err(SimError::Unsorted { index });
            }
        }
    }
    Ok(())
}

struct Simulator<'a> {
    config: &'a SimConfig,
    engine: PolicyEngine,
    cache: Cache,
    write_log: HashMap<Key, Vec<f64>>,
    dirty: BTreeSet<Key>,
    invalidated: HashSet<Key>,
    flushed: u64,
    metrics: FreshnessMetrics,
    transcript: Option<Vec<TranscriptRecord>>,
    served: Option<Vec<ServedRead>>,
}

struct View<'s> {
    cache: &'s Cache,
    invalidated: &'s HashSet<Key>,
    write_log: &'s HashMap<Key, Vec<f64>>,
}

impl CacheView for View<'_> {
    fn is_resident(&self, key: Key) -> bool {
        self.cache.get(key).is_some()
    }

    fn is_invalidated(&self, key: Key) -> bool {
        self.invalidated.contains(&key)
    }

    fn is_stale(&self, key: Key) -> bool {
        let writes = self.write_log.get(&key).map_or(0, Vec::len);
        self.cache
            .get(key)
            .is_some_and(|e| e.valid && e.reflected_writes < writes)
    }
}

impl<'a> Simulator<'a> {
    fn new(config: &'a SimConfig, events: &[Event]) -> Result<Self, SimError> {
        let engine = PolicyEngine::new(config.policy, config.costs, config.staleness_bound, events, config.seed)?;
        Ok(Self {
            config,
            engine,
            cache: Cache::new(config.cache_capacity),
            write_log: HashMap::new(),
            dirty: BTreeSet::new(),
            invalidated: HashSet::new(),
            flushed: 0,
            metrics: FreshnessMetrics::default(),
            transcript: config.record_transcript.then(Vec::new),
            served: config.record_audit.then(Vec::new),
        })
    }

    fn t(&self) -> f64 {
        self.config.staleness_bound
    }

    fn log(&mut self, event_seq: Option<u64>, time: f64, key: Key, kind: RecordKind, detail: String) {
        if let Some(t) = self.transcript.as_mut() {
            t.push(TranscriptRecord {
                event_seq,
                time,
                key,
                kind,
                detail,
            });
        }
    }

    /// Flush every boundary at or before `t`.
    fn advance_to(&mut self, t: f64) -> Result<(), SimError> {
        let target = interval_of(t, self.t());
        while self.flushed < target {
            let idle_until = if self.dirty.is_empty() {
                self.engine
                    .next_wakeup()
                    .map_or(target, |w| w.saturating_sub(1).min(target))
            } else {
                self.flushed
            };
            if idle_until > self.flushed {
                let skipped = idle_until - self.flushed;
                self.metrics.boundaries += skipped;
                self.metrics.invalidated_boundary_sum += skipped * self.invalidated.len() as u64;
                self.flushed = idle_until;
                continue;
            }
            self.flush(self.flushed + 1)?;
        }
        Ok(())
    }

    fn flush(&mut self, boundary: u64) -> Result<(), SimError> {
        let view = View {
            cache: &self.cache,
            invalidated: &self.invalidated,
            write_log: &self.write_log,
        };
        let actions = self.engine.decide(boundary, &self.dirty, &view)?;
        self.dirty.clear();
        let now = boundary_time(boundary, self.t());
        let costs = self.config.costs;
        for (key, action) in actions {
            match action {
                PolicyAction::DoNothing => {}
                PolicyAction::SendUpdate => {
                    self.metrics.charge(key, costs.update());
                    self.metrics.updates_sent += 1;
                    let (count, last) = self.backend_version(key);
                    let detail = match self.cache.get_mut(key) {
                        Some(entry) if entry.valid => {
                            entry.reflected_writes = count;
                            entry.version_time = last;
                            format!("v={count}")
                        }
                        Some(_) => "invalid".to_string(),
                        None => "absent".to_string(),
                    };
                    self.log(None, now, key, RecordKind::UpdateSent, detail);
                }
                PolicyAction::SendInvalidate => {
                    if !self.invalidated.insert(key) {
                        continue;
                    }
                    self.metrics.charge(key, costs.invalidate());
                    self.metrics.invalidates_sent += 1;
                    let resident = match self.cache.get_mut(key) {
                        Some(entry) => {
                            entry.valid = false;
                            true
                        }
                        None => false,
                    };
                    self.log(
                        None,
                        now,
                        key,
                        RecordKind::InvalidateSent,
                        format!("resident={resident}"),
                    );
                }
            }
        }
        self.metrics.boundaries += 1;
        self.metrics.invalidated_boundary_sum += self.invalidated.len() as u64;
        self.flushed = boundary;
        Ok(())
    }

    fn backend_version(&self, key: Key) -> (usize, Option<f64>) {
        let log = self.write_log.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        (log.len(), log.last().copied())
    }

    fn ttl_deadline(&self, fetched_at: f64) -> Option<f64> {
        if !self.config.policy.is_ttl() {
            return None;
        }
        Some(match self.config.ttl_clock {
            TtlClock::Aligned => boundary_time(interval_of(fetched_at, self.t()) + 1, self.t()),
            TtlClock::PerEntry => fetched_at + self.t(),
        })
    }

    fn fresh_entry(&self, key: Key, now: f64) -> CacheEntry {
        let (count, last) = self.backend_version(key);
        CacheEntry {
            key,
            version_time: last,
            reflected_writes: count,
            fetched_at: now,
            valid: true,
            ttl_deadline: self.ttl_deadline(now),
            lru_stamp: 0,
            polls_settled: match self.config.ttl_clock {
                TtlClock::Aligned => interval_of(now, self.t()),
                TtlClock::PerEntry => 0,
            },
        }
    }

    /// Charge the polls a TTL-polling entry has made since it was last settled.
    fn settle_polls(&mut self, key: Key, now: f64, seq: Option<u64>) {
        if self.config.policy != PolicyDescriptor::TtlPolling {
            return;
        }
        let t = self.t();
        let clock = self.config.ttl_clock;
        let Some(entry) = self.cache.get(key) else { return };
        let (due, last_poll, next_poll) = match clock {
            TtlClock::Aligned => {
                let nb = interval_of(now, t);
                (nb, boundary_time(nb, t), boundary_time(nb + 1, t))
            }
            TtlClock::PerEntry => {
                let k = interval_of(now - entry.fetched_at, t);
                (
                    k,
                    entry.fetched_at + k as f64 * t,
                    entry.fetched_at + (k + 1) as f64 * t,
                )
            }
        };
        if due <= entry.polls_settled {
            return;
        }
        let polls = due - entry.polls_settled;
        let log = self.write_log.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        let reflected = log.partition_point(|&w| w < last_poll);
        let version_time = reflected.checked_sub(1).map(|i| log[i]);
        let entry = self.cache.get_mut(key).expect("checked above");
        entry.polls_settled = due;
        entry.reflected_writes = reflected;
        entry.version_time = version_time;
        entry.ttl_deadline = Some(next_poll);
        self.metrics.charge(key, polls as f64 * self.config.costs.miss());
        self.metrics.polls += polls;
        self.log(seq, last_poll, key, RecordKind::TtlPoll, format!("count={polls}"));
    }

    fn serve(&mut self, e: &Event) {
        if let (Some(served), Some(entry)) = (self.served.as_mut(), self.cache.get(e.key)) {
            served.push(ServedRead {
                event_seq: e.seq,
                time: e.time,
                key: e.key,
                version_time: entry.version_time,
                reflected_writes: entry.reflected_writes,
            });
        }
    }

    fn read(&mut self, e: &Event) {
        let (key, now) = (e.key, e.time);
        self.metrics.reads_total += 1;
        self.metrics.key(key).reads += 1;
        let miss_cost = self.config.costs.miss();

        if self.cache.get(key).is_some() {
            self.metrics.reads_with_resident_object += 1;
            self.settle_polls(key, now, Some(e.seq));
            let entry = self.cache.get(key).expect("resident");
            let expired =
                self.config.policy == PolicyDescriptor::TtlExpiry && entry.ttl_deadline.is_some_and(|d| now >= d);
            if entry.valid && !expired {
                self.metrics.hits += 1;
                self.metrics.key(key).hits += 1;
                let detail = format!("v={}", entry.reflected_writes);
                self.cache.touch(key);
                self.log(Some(e.seq), now, key, RecordKind::Hit, detail);
            } else {
                if expired {
                    let deadline = entry.ttl_deadline.unwrap_or(now);
                    self.log(
                        Some(e.seq),
                        now,
                        key,
                        RecordKind::TtlExpire,
                        format!("deadline={deadline}"),
                    );
                }
                self.metrics.stale_misses += 1;
                self.metrics.key(key).stale_misses += 1;
                self.metrics.charge(key, miss_cost);
                let fresh = self.fresh_entry(key, now);
                let detail = format!("v={}", fresh.reflected_writes);
                self.cache.refill(fresh);
                self.invalidated.remove(&key);
                self.log(Some(e.seq), now, key, RecordKind::StaleMiss, detail);
            }
        } else {
            self.metrics.cold_or_capacity_misses += 1;
            self.metrics.key(key).cold_misses += 1;
            self.metrics.charge(key, miss_cost);
            if self.cache.is_full() {
                if let Some(victim) = self.cache.lru_key() {
                    self.settle_polls(victim, now, Some(e.seq));
                    self.cache.remove(victim);
                    self.metrics.evictions += 1;
                    self.log(Some(e.seq), now, victim, RecordKind::Evict, String::new());
                }
            }
            let fresh = self.fresh_entry(key, now);
            let detail = format!("v={}", fresh.reflected_writes);
            self.cache.refill(fresh);
            self.invalidated.remove(&key);
            self.log(Some(e.seq), now, key, RecordKind::ColdMiss, detail);
        }
        self.serve(e);
    }

    fn write(&mut self, e: &Event) {
        self.metrics.writes_total += 1;
        self.metrics.key(e.key).writes += 1;
        self.write_log.entry(e.key).or_default().push(e.time);
        // An invalidated copy will be refilled from the store on its next
        // read, so further writes need no message.
        if !self.config.policy.is_ttl() && !self.invalidated.contains(&e.key) {
            self.dirty.insert(e.key);
        }
    }

    fn finish(&mut self, horizon: f64) {
        let mut keys = self.cache.keys();
        keys.sort_unstable();
        for key in keys {
            self.settle_polls(key, horizon, None);
        }
    }

    fn into_run(self) -> SimRun {
        let audit = self.served.map(|served| AuditLog {
            served,
            writes: self.write_log,
        });
        SimRun {
            metrics: self.metrics,
            transcript: self.transcript,
            audit,
        }
    }
}
