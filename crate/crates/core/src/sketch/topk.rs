use std::collections::{BTreeSet, HashMap};

use super::{CountMinSketch, EwEstimate, RwCounts, RwEstimator, SketchError, Tier};
use crate::workload::{Key, Op};

/// Key, two counters, the two promotion seeds, and its slot in the min-ordered index.
pub const TOPK_ENTRY_BYTES: usize = 8 + 4 * 8 + (8 + 8);

#[derive(Debug, Clone, Copy)]
struct Entry {
    counts: RwCounts,
    seed: RwCounts,
}

/// Exact counters for up to `k` hot keys backed by a count-min sketch.
///
/// While the exact table has room, new keys enter it directly. Once full, a
/// key lives in the sketch until its estimated total exceeds the smallest
/// exact total; it is then promoted with its sketch estimate as the starting
/// count, and the displaced key's counts gathered since promotion are added
/// back into the sketch (the seed is already there).
#[derive(Debug, Clone)]
pub struct TopKSketch {
    k: usize,
    exact: HashMap<Key, Entry>,
    by_total: BTreeSet<(u64, Key)>,
    fallback: CountMinSketch,
}

impl TopKSketch {
    pub fn new(k: usize, depth: usize, width: usize, seed: u64) -> Result<Self, SketchError> {
        Ok(Self {
            k,
            exact: HashMap::with_capacity(k),
            by_total: BTreeSet::new(),
            fallback: CountMinSketch::new(depth, width, seed)?,
        })
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    pub fn is_exact(&self, key: Key) -> bool {
        self.exact.contains_key(&key)
    }

    pub fn exact_len(&self) -> usize {
        self.exact.len()
    }

    fn admit(&mut self, key: Key, counts: RwCounts, seed: RwCounts) {
        self.by_total.insert((counts.total(), key));
        self.exact.insert(key, Entry { counts, seed });
    }

    fn demote_coldest(&mut self) {
        if let Some((total, key)) = self.by_total.pop_first() {
            let e = self.exact.remove(&key).expect("index and table agree");
            debug_assert_eq!(total, e.counts.total());
            self.fallback.add(key, Op::Read, e.counts.reads - e.seed.reads);
            self.fallback.add(key, Op::Write, e.counts.writes - e.seed.writes);
        }
    }
}

impl RwEstimator for TopKSketch {
    fn record(&mut self, key: Key, op: Op) {
        if let Some(e) = self.exact.get_mut(&key) {
            self.by_total.remove(&(e.counts.total(), key));
            e.counts.bump(op);
            self.by_total.insert((e.counts.total(), key));
            return;
        }
        if self.exact.len() < self.k {
            let seed = self.fallback.counts(key);
            let mut counts = seed;
            counts.bump(op);
            self.admit(key, counts, seed);
            return;
        }
        self.fallback.record(key, op);
        let estimate = self.fallback.counts(key);
        let coldest = self.by_total.first().map(|(total, _)| *total);
        if matches!(coldest, Some(min) if estimate.total() > min) {
            self.demote_coldest();
            self.admit(key, estimate, estimate);
        }
    }

    fn counts(&self, key: Key) -> RwCounts {
        match self.exact.get(&key) {
            Some(e) => e.counts,
            None => self.fallback.counts(key),
        }
    }

    fn estimate_ew(&self, key: Key) -> EwEstimate {
        match self.exact.get(&key) {
            Some(e) => EwEstimate::from_counts(e.counts, Tier::TopK),
            None => self.fallback.estimate_ew(key),
        }
    }

    fn memory_footprint(&self) -> usize {
        self.k * TOPK_ENTRY_BYTES + self.fallback.memory_footprint()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hot_key_stays_exact() {
        let mut s = TopKSketch::new(1, 4, 256, 1).unwrap();
        for _ in 0..5 {
            s.record(Key(1), Op::Read);
        }
        for _ in 0..2 {
            s.record(Key(2), Op::Write);
        }
        assert!(s.is_exact(Key(1)));
        assert!(!s.is_exact(Key(2)));
        assert_eq!(s.estimate_ew(Key(1)).tier, Tier::TopK);
        assert_eq!(s.estimate_ew(Key(2)).tier, Tier::CountMin);
        assert_eq!(s.counts(Key(1)), RwCounts { reads: 5, writes: 0 });
    }

    #[test]
    fn cold_key_is_promoted_once_hotter() {
        let mut s = TopKSketch::new(1, 4, 256, 2).unwrap();
        s.record(Key(1), Op::Read);
        for _ in 0..3 {
            s.record(Key(2), Op::Write);
        }
        assert!(s.is_exact(Key(2)));
        assert!(!s.is_exact(Key(1)));
        // Demoted history is folded back, so the old key is not undercounted.
        assert!(s.counts(Key(1)).reads >= 1);
        assert!(s.counts(Key(2)).writes >= 3);
        assert_eq!(s.exact_len(), 1);
    }

    #[test]
    fn zero_capacity_is_plain_count_min() {
        let mut s = TopKSketch::new(0, 4, 2048, 0).unwrap();
        let cms = CountMinSketch::new(4, 2048, 0).unwrap();
        assert_eq!(s.memory_footprint(), cms.memory_footprint());
        s.record(Key(3), Op::Read);
        assert_eq!(s.estimate_ew(Key(3)).tier, Tier::CountMin);
    }
}
