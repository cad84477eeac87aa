use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::workload::Key;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheEntry {
    pub key: Key,
    /// Time of the latest backend write this copy reflects.
    pub version_time: Option<f64>,
    /// Number of backend writes this copy reflects.
    pub reflected_writes: usize,
    pub fetched_at: f64,
    pub valid: bool,
    pub ttl_deadline: Option<f64>,
    pub lru_stamp: u64,
    /// Polls already charged: a boundary index, or a poll count for per-entry timers.
    pub polls_settled: u64,
}

/// Resident entries with LRU order. Invalid entries stay resident.
#[derive(Debug, Default)]
pub(super) struct Cache {
    capacity: usize,
    entries: HashMap<Key, CacheEntry>,
    lru: BTreeMap<u64, Key>,
    clock: u64,
}

impl Cache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            ..Self::default()
        }
    }

    pub fn get(&self, key: Key) -> Option<&CacheEntry> {
        self.entries.get(&key)
    }

    pub fn get_mut(&mut self, key: Key) -> Option<&mut CacheEntry> {
        self.entries.get_mut(&key)
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn lru_key(&self) -> Option<Key> {
        self.lru.first_key_value().map(|(_, k)| *k)
    }

    pub fn keys(&self) -> Vec<Key> {
        self.entries.keys().copied().collect()
    }

    pub fn touch(&mut self, key: Key) {
        self.clock += 1;
        if let Some(e) = self.entries.get_mut(&key) {
            self.lru.remove(&e.lru_stamp);
            e.lru_stamp = self.clock;
            self.lru.insert(self.clock, key);
        }
    }

    /// Insert or replace an entry and mark it most recently used.
    pub fn refill(&mut self, mut entry: CacheEntry) {
        self.clock += 1;
        let key = entry.key;
        entry.lru_stamp = self.clock;
        if let Some(old) = self.entries.insert(key, entry) {
            self.lru.remove(&old.lru_stamp);
        }
        self.lru.insert(self.clock, key);
    }

    pub fn remove(&mut self, key: Key) -> Option<CacheEntry> {
        let e = self.entries.remove(&key)?;
        self.lru.remove(&e.lru_stamp);
        Some(e)
    }
}
