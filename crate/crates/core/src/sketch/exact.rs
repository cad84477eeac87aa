use std::collections::HashMap;

use super::{EwEstimate, RwCounts, RwEstimator, Tier};
use crate::workload::{Key, Op};

/// Key plus five 8-byte counters.
pub const EXACT_ENTRY_BYTES: usize = 8 + 5 * 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExactCounters {
    /// Sum of write-run lengths observed at reads (C1).
    pub sample_sum: u64,
    /// Number of write-run samples (C2).
    pub samples: u64,
    /// Writes since the last read (C3).
    pub pending_writes: u64,
    pub counts: RwCounts,
}

/// Three-counter `E[W]` tracker with per-key read/write totals.
#[derive(Debug, Clone, Default)]
pub struct ExactEwTracker {
    keys: HashMap<Key, ExactCounters>,
}

impl ExactEwTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn counters(&self, key: Key) -> Option<&ExactCounters> {
        self.keys.get(&key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Key, &ExactCounters)> {
        self.keys.iter().map(|(k, c)| (*k, c))
    }
}

impl RwEstimator for ExactEwTracker {
    fn record(&mut self, key: Key, op: Op) {
        let c = self.keys.entry(key).or_default();
        c.counts.bump(op);
        match op {
            Op::Write => c.pending_writes += 1,
            // A read right after a read carries no sample.
            Op::Read if c.pending_writes > 0 => {
                c.sample_sum += c.pending_writes;
                c.samples += 1;
                c.pending_writes = 0;
            }
            Op::Read => {}
        }
    }

    fn counts(&self, key: Key) -> RwCounts {
        self.keys.get(&key).map(|c| c.counts).unwrap_or_default()
    }

    fn estimate_ew(&self, key: Key) -> EwEstimate {
        let c = self.keys.get(&key).copied().unwrap_or_default();
        EwEstimate {
            sample_mean: (c.samples > 0).then(|| c.sample_sum as f64 / c.samples as f64),
            ..EwEstimate::from_counts(c.counts, Tier::Exact)
        }
    }

    fn memory_footprint(&self) -> usize {
        self.keys.len() * EXACT_ENTRY_BYTES
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_rules_on_short_sequence() {
        let mut t = ExactEwTracker::new();
        for op in [Op::Write, Op::Write, Op::Read, Op::Write, Op::Read] {
            t.record(Key(1), op);
        }
        let c = t.counters(Key(1)).unwrap();
        assert_eq!((c.sample_sum, c.samples, c.pending_writes), (3, 2, 0));
        let e = t.estimate_ew(Key(1));
        assert_eq!(e.sample_mean, Some(1.5));
        assert_eq!(e.value, 1.5);
        assert_eq!(e.tier, Tier::Exact);
    }

    #[test]
    fn consecutive_reads_add_no_sample() {
        let mut t = ExactEwTracker::new();
        for op in [Op::Read, Op::Read, Op::Write, Op::Read, Op::Read] {
            t.record(Key(0), op);
        }
        let c = t.counters(Key(0)).unwrap();
        assert_eq!((c.sample_sum, c.samples), (1, 1));
        assert_eq!(c.counts, RwCounts { reads: 4, writes: 1 });
    }

    #[test]
    fn unseen_and_unwritten_keys() {
        let mut t = ExactEwTracker::new();
        assert_eq!(t.estimate_ew(Key(9)).value, 0.0);
        t.record(Key(9), Op::Read);
        assert_eq!(t.estimate_ew(Key(9)).value, 0.0);
        assert_eq!(t.estimate_ew(Key(9)).sample_mean, None);
        assert_eq!(t.memory_footprint(), EXACT_ENTRY_BYTES);
    }
}
