use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::workload::Key;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecordKind {
    Hit,
    StaleMiss,
    ColdMiss,
    UpdateSent,
    InvalidateSent,
    TtlExpire,
    TtlPoll,
    Evict,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Hit => "HIT",
            RecordKind::StaleMiss => "STALE_MISS",
            RecordKind::ColdMiss => "COLD_MISS",
            RecordKind::UpdateSent => "UPDATE_SENT",
            RecordKind::InvalidateSent => "INVALIDATE_SENT",
            RecordKind::TtlExpire => "TTL_EXPIRE",
            RecordKind::TtlPoll => "TTL_POLL",
            RecordKind::Evict => "EVICT",
        }
    }
}

/// One transcript line: `event_seq,time,key,kind,detail`. Boundary actions
/// have no triggering event and print `-` for the sequence number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptRecord {
    pub event_seq: Option<u64>,
    pub time: f64,
    pub key: Key,
    pub kind: RecordKind,
    pub detail: String,
}

impl fmt::Display for TranscriptRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.event_seq {
            Some(seq) => write!(f, "{seq},")?,
            None => f.write_str("-,")?,
        }
        write!(f, "{},{},{},{}", self.time, self.key, self.kind.as_str(), self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ServedRead {
    pub event_seq: u64,
    pub time: f64,
    pub key: Key,
    pub version_time: Option<f64>,
    /// Prefix of the key's write log contained in the served copy.
    pub reflected_writes: usize,
}

/// Served reads plus the backend write timeline of every key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditLog {
    pub served: Vec<ServedRead>,
    pub writes: HashMap<Key, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub event_seq: u64,
    pub served_at: f64,
    pub key: Key,
    /// Earliest write missing from the served copy.
    pub missed_write: f64,
}

/// Reads that returned a copy older than the staleness bound allows: some
/// write missing from the copy happened at or before `served_at - T`.
pub fn audit_staleness(log: &AuditLog, staleness_bound: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for read in &log.served {
        let Some(writes) = log.writes.get(&read.key) else {
            continue;
        };
        // Writes are time-ordered, so the first missing one is the oldest.
        if let Some(&missed) = writes.get(read.reflected_writes) {
            if missed <= read.time - staleness_bound {
                out.push(Violation {
                    event_seq: read.event_seq,
                    served_at: read.time,
                    key: read.key,
                    missed_write: missed,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_format() {
        let r = TranscriptRecord {
            event_seq: Some(7),
            time: 1.25,
            key: Key(3),
            kind: RecordKind::StaleMiss,
            detail: "v=2".into(),
        };
        assert_eq!(r.to_string(), "7,1.25,3,STALE_MISS,v=2");
        let b = TranscriptRecord {
            event_seq: None,
            kind: RecordKind::UpdateSent,
            ..r
        };
        assert_eq!(b.to_string(), "-,1.25,3,UPDATE_SENT,v=2");
    }

    #[test]
    fn constructed_violation_is_reported() {
        let (t, w) = (1.0, 3.0);
        let log = AuditLog {
            served: vec![
                ServedRead {
                    event_seq: 1,
                    time: w + 2.0 * t,
                    key: Key(0),
                    version_time: None,
                    reflected_writes: 0,
                },
                ServedRead {
                    event_seq: 2,
                    time: w + 0.5 * t,
                    key: Key(0),
                    version_time: None,
                    reflected_writes: 0,
                },
            ],
            writes: HashMap::from([(Key(0), vec![w])]),
        };
        let v = audit_staleness(&log, t);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].event_seq, v[0].missed_write), (1, w));
    }

    #[test]
    fn boundary_age_counts_as_violation() {
        let log = AuditLog {
            served: vec![ServedRead {
                event_seq: 0,
                time: 2.0,
                key: Key(0),
                version_time: None,
                reflected_writes: 0,
            }],
            writes: HashMap::from([(Key(0), vec![1.0])]),
        };
        assert_eq!(audit_staleness(&log, 1.0).len(), 1);
        assert!(audit_staleness(&log, 1.5).is_empty());
    }
}
