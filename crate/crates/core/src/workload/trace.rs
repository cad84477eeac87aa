//! Line-oriented trace ingestion: `timestamp_s,key,op[,key_size,value_size]`.

use std::collections::HashMap;
use std::path::Path;

use super::{Event, EventStream, Key, Op, WorkloadError, DEFAULT_KEY_SIZE, DEFAULT_VALUE_SIZE};

/// Defaults applied to records that omit the size columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceFormat {
    pub default_key_size: u32,
    pub default_value_size: u32,
}

impl Default for TraceFormat {
    fn default() -> Self {
        Self {
            default_key_size: DEFAULT_KEY_SIZE,
            default_value_size: DEFAULT_VALUE_SIZE,
        }
    }
}

pub fn parse_trace(path: &Path, format: &TraceFormat) -> Result<EventStream, WorkloadError> {
    let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace_str(&text, format)
}

fn parse_op(token: &str) -> Option<Op> {
    match token.to_ascii_uppercase().as_str() {
        "R" | "READ" | "GET" => Some(Op::Read),
        "W" | "WRITE" | "SET" | "UPDATE" | "DELETE" => Some(Op::Write),
        _ => None,
    }
}

pub fn parse_trace_str(text: &str, format: &TraceFormat) -> Result<EventStream, WorkloadError> {
    let mut ids: HashMap<String, Key> = HashMap::new();
    let mut names = Vec::new();
    let mut events = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| WorkloadError::Malformed { line, reason };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 && fields.len() != 5 {
            return Err(malformed(format!("expected 3 or 5 fields, found {}", fields.len())));
        }
        let time: f64 = fields[0]
            .parse()
            .map_err(|_| malformed(format!("bad timestamp `{}`", fields[0])))?;
        if !time.is_finite() || time < 0.0 {
            return Err(malformed(format!(
                "timestamp must be a non-negative number, got `{}`",
                fields[0]
            )));
        }
        if fields[1].is_empty() {
            return Err(malformed("empty key".into()));
        }
        let op = parse_op(fields[2]).ok_or_else(|| malformed(format!("unknown op `{}`", fields[2])))?;
        let (key_size, value_size) = if fields.len() == 5 {
            let key_size: u32 = fields[3]
                .parse()
                .map_err(|_| malformed(format!("bad key size `{}`", fields[3])))?;
            let value_size: u32 = fields[4]
                .parse()
                .map_err(|_| malformed(format!("bad value size `{}`", fields[4])))?;
            if key_size == 0 {
                return Err(malformed("key size must be positive".into()));
            }
            (key_size, value_size)
        } else {
            (format.default_key_size, format.default_value_size)
        };
        let key = *ids.entry(fields[1].to_string()).or_insert_with(|| {
            names.push(fields[1].to_string());
            Key(names.len() as u64 - 1)
        });
        events.push(Event {
            time,
            key,
            op,
            key_size,
            value_size,
            seq: 0,
        });
    }

    // Stable: records sharing a timestamp keep their file order.
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    for (i, e) in events.iter_mut().enumerate() {
        e.seq = i as u64;
    }
    let duration = events.last().map_or(0.0, |e| e.time);
    Ok(EventStream {
        events,
        duration,
        key_names: Some(names),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EventStream, WorkloadError> {
        parse_trace_str(text, &TraceFormat::default())
    }

    #[test]
    fn three_valid_lines() {
        let s = parse("0.5,user:1,R\n1.0,user:2,W,8,64\n2.0,user:1,GET\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(
            s.events.iter().map(|e| (e.key, e.op)).collect::<Vec<_>>(),
            vec![(Key(0), Op::Read), (Key(1), Op::Write), (Key(0), Op::Read)]
        );
        assert_eq!((s.events[0].key_size, s.events[0].value_size), (16, 128));
        assert_eq!((s.events[1].key_size, s.events[1].value_size), (8, 64));
        assert_eq!(s.key_name(Key(1)), "user:2");
        assert_eq!(s.duration, 2.0);
    }

    #[test]
    fn decreasing_timestamps_sort_stably() {
        let s = parse("# header\n3,a,R\n1,b,W\n1,c,R\n\n0.5,a,W\n").unwrap();
        let order: Vec<_> = s.events.iter().map(|e| (e.time, s.key_name(e.key))).collect();
        assert_eq!(
            order,
            vec![
                (0.5, "a".into()),
                (1.0, "b".into()),
                (1.0, "c".into()),
                (3.0, "a".into())
            ]
        );
        assert!(s.events.iter().enumerate().all(|(i, e)| e.seq == i as u64));
    }

    #[test]
    fn op_aliases() {
        let s = parse("0,k,UPDATE\n1,k,set\n2,k,DELETE\n3,k,read\n4,k,w\n").unwrap();
        let ops: Vec<_> = s.events.iter().map(|e| e.op).collect();
        assert_eq!(ops, vec![Op::Write, Op::Write, Op::Write, Op::Read, Op::Write]);
    }

    #[test]
    fn reports_first_bad_line() {
        let err = parse("0,a,R\n1,a,FETCH\n-1,a,R\n").unwrap_err();
        assert!(matches!(err, WorkloadError::Malformed { line: 2, .. }), "{err}");
        let err = parse("0,a,R\n# c\n-1,a,R\n").unwrap_err();
        assert!(matches!(err, WorkloadError::Malformed { line: 3, .. }), "{err}");
        assert!(matches!(parse("0,a\n"), Err(WorkloadError::Malformed { line: 1, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = parse_trace(Path::new("/nonexistent/trace.csv"), &TraceFormat::default()).unwrap_err();
        assert!(matches!(err, WorkloadError::Io { .. }));
    }
}
