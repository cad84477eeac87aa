use std::collections::{BTreeSet, HashMap};

use super::{decide_batch, FutureReads, PolicyAction, PolicyContext, PolicyDescriptor, PolicyError};
use crate::freshmodel::CostParams;
use crate::simcore::{boundary_time, interval_of};
use crate::sketch::RwEstimator;
use crate::workload::{Event, Key, Op};

/// Read-only view of the cache and store state at a boundary.
pub trait CacheView {
    fn is_resident(&self, key: Key) -> bool;
    fn is_invalidated(&self, key: Key) -> bool;
    /// Resident, valid, and missing at least one backend write.
    fn is_stale(&self, key: Key) -> bool;
}

/// Per-run policy state: the estimator for Adaptive, the future oracle and
/// deferred keys for Opt.
pub struct PolicyEngine {
    descriptor: PolicyDescriptor,
    costs: CostParams,
    staleness_bound: f64,
    estimator: Option<Box<dyn RwEstimator>>,
    future: Option<FutureReads>,
    pending: BTreeSet<(u64, Key)>,
    pending_at: HashMap<Key, u64>,
}

impl PolicyEngine {
    /// `events` is consulted only by Opt.
    pub fn new(
        descriptor: PolicyDescriptor,
        costs: CostParams,
        staleness_bound: f64,
        events: &[Event],
        seed: u64,
    ) -> Result<Self, PolicyError> {
        let estimator = match descriptor.adaptive_options() {
            Some(o) => Some(o.sketch.build(seed)?),
            None => None,
        };
        let future = matches!(descriptor, PolicyDescriptor::Opt).then(|| FutureReads::from_events(events));
        Ok(Self {
            descriptor,
            costs,
            staleness_bound,
            estimator,
            future,
            pending: BTreeSet::new(),
            pending_at: HashMap::new(),
        })
    }

    pub fn descriptor(&self) -> &PolicyDescriptor {
        &self.descriptor
    }

    pub fn estimator(&self) -> Option<&dyn RwEstimator> {
        self.estimator.as_deref()
    }

    pub fn observe(&mut self, key: Key, op: Op) {
        if let Some(est) = self.estimator.as_mut() {
            est.record(key, op);
        }
    }

    /// Earliest boundary at which a deferred key must be reconsidered.
    pub fn next_wakeup(&self) -> Option<u64> {
        self.pending.first().map(|(b, _)| *b)
    }

    pub fn decide(
        &mut self,
        boundary: u64,
        dirty: &BTreeSet<Key>,
        view: &dyn CacheView,
    ) -> Result<Vec<(Key, PolicyAction)>, PolicyError> {
        let now = boundary_time(boundary, self.staleness_bound);
        let resident = |k: Key| view.is_resident(k);
        let invalidated = |k: Key| view.is_invalidated(k);
        let mut ctx = PolicyContext::new(self.costs, self.staleness_bound, now);
        ctx.invalidated = Some(&invalidated);
        ctx.estimator = self.estimator.as_deref();
        if matches!(self.descriptor, PolicyDescriptor::AdaptiveCs(_)) {
            ctx.residency = Some(&resident);
        }

        let Some(future) = self.future.as_ref() else {
            return Ok(decide_batch(&self.descriptor, dirty.iter().copied(), &ctx)?
                .into_iter()
                .collect());
        };

        let mut candidates = dirty.clone();
        while let Some(&(at, key)) = self.pending.first() {
            if at > boundary {
                break;
            }
            self.pending.pop_first();
            candidates.insert(key);
        }
        for key in &candidates {
            if let Some(at) = self.pending_at.remove(key) {
                self.pending.remove(&(at, *key));
            }
        }
        // Only a resident copy that misses writes can be served stale.
        candidates.retain(|&k| view.is_resident(k) && view.is_stale(k));
        ctx.future = Some(future);
        let decided = decide_batch(&self.descriptor, candidates.iter().copied(), &ctx)?;

        let mut actions = Vec::with_capacity(decided.len());
        for (key, action) in decided {
            if action == PolicyAction::DoNothing {
                if let Some(read) = future.next_read(key, now) {
                    let at = interval_of(read, self.staleness_bound);
                    self.pending.insert((at, key));
                    self.pending_at.insert(key, at);
                }
            }
            actions.push((key, action));
        }
        Ok(actions)
    }
}
