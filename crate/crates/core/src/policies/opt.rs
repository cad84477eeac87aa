//! The omniscient baseline: greedy schedule, DP oracle, and future-read lookup.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::{PolicyAction, PolicyError};
use crate::freshmodel::CostParams;
use crate::simcore::interval_of;
use crate::workload::{Event, Key, Op};

/// Longest sequence accepted by [`opt_oracle_dp`].
pub const MAX_ORACLE_INTERVALS: usize = 25;

/// Sorted read times per key.
#[derive(Debug, Clone, Default)]
pub struct FutureReads {
    reads: HashMap<Key, Vec<f64>>,
}

impl FutureReads {
    pub fn from_events(events: &[Event]) -> Self {
        let mut reads: HashMap<Key, Vec<f64>> = HashMap::new();
        for e in events.iter().filter(|e| e.op == Op::Read) {
            reads.entry(e.key).or_default().push(e.time);
        }
        Self { reads }
    }

    /// First read of `key` at or after `at`.
    pub fn next_read(&self, key: Key, at: f64) -> Option<f64> {
        let times = self.reads.get(&key)?;
        times.get(times.partition_point(|&t| t < at)).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct IntervalSummary {
    pub has_read: bool,
    pub has_write: bool,
}

impl IntervalSummary {
    pub fn new(has_read: bool, has_write: bool) -> Self {
        Self { has_read, has_write }
    }
}

/// Per-key schedule; `actions[i]` is taken at the boundary after interval `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeySchedule {
    pub actions: Vec<PolicyAction>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptSchedule {
    pub keys: BTreeMap<Key, KeySchedule>,
    pub total_cost: f64,
}

/// Activity of each key per interval, from interval 0 to the key's last event.
pub fn interval_summaries(events: &[Event], staleness_bound: f64) -> BTreeMap<Key, Vec<IntervalSummary>> {
    let mut out: BTreeMap<Key, Vec<IntervalSummary>> = BTreeMap::new();
    for e in events {
        let i = interval_of(e.time, staleness_bound) as usize;
        let seq = out.entry(e.key).or_default();
        if seq.len() <= i {
            seq.resize(i + 1, IntervalSummary::default());
        }
        match e.op {
            Op::Read => seq[i].has_read = true,
            Op::Write => seq[i].has_write = true,
        }
    }
    out
}

/// Omniscient schedule for every key of an event stream.
pub fn opt_decide(events: &[Event], staleness_bound: f64, costs: &CostParams) -> Result<OptSchedule, PolicyError> {
    let mut keys = BTreeMap::new();
    let mut total_cost = 0.0;
    for (key, seq) in interval_summaries(events, staleness_bound) {
        let schedule = opt_decide_key(&seq, costs)?;
        total_cost += schedule.cost;
        keys.insert(key, schedule);
    }
    Ok(OptSchedule { keys, total_cost })
}

/// Greedy lookahead when `c_u < c_m`: leave a dirty key alone until the
/// boundary right before its next read interval, then update it. Otherwise
/// the schedule comes from the DP.
pub fn opt_decide_key(seq: &[IntervalSummary], costs: &CostParams) -> Result<KeySchedule, PolicyError> {
    if costs.update() >= costs.miss() {
        return Ok(dp_schedule(seq, costs));
    }
    let mut actions = vec![PolicyAction::DoNothing; seq.len().saturating_sub(1)];
    let (mut dirty, mut cost) = (false, 0.0);
    for (i, s) in seq.iter().enumerate() {
        if s.has_read && dirty {
            actions[i - 1] = PolicyAction::SendUpdate;
            cost += costs.update();
            dirty = false;
        }
        dirty |= s.has_write;
    }
    Ok(KeySchedule { actions, cost })
}

/// Exact minimum schedule cost for a short sequence.
pub fn opt_oracle_dp(seq: &[IntervalSummary], costs: &CostParams) -> Result<f64, PolicyError> {
    if seq.len() > MAX_ORACLE_INTERVALS {
        return Err(PolicyError::SequenceTooLong {
            len: seq.len(),
            max: MAX_ORACLE_INTERVALS,
        });
    }
    Ok(dp_schedule(seq, costs).cost)
}

/// Cost of running `actions` over `seq`, starting from a fresh cached copy.
pub fn schedule_cost(
    seq: &[IntervalSummary],
    actions: &[PolicyAction],
    costs: &CostParams,
) -> Result<f64, PolicyError> {
    let boundaries = seq.len().saturating_sub(1);
    if actions.len() != boundaries {
        return Err(PolicyError::ScheduleLength {
            got: actions.len(),
            intervals: seq.len(),
        });
    }
    let mut state = State::Fresh;
    let mut cost = 0.0;
    for (i, s) in seq.iter().enumerate() {
        if i > 0 {
            let (next, c) = state
                .act(actions[i - 1], costs)
                .ok_or(PolicyError::InfeasibleSchedule(i))?;
            state = next;
            cost += c;
        }
        let (next, c) = state.enter(*s, costs).ok_or(PolicyError::InfeasibleSchedule(i))?;
        state = next;
        cost += c;
    }
    Ok(cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Fresh,
    StaleDirty,
    Invalid,
}

impl State {
    const ALL: [State; 3] = [State::Fresh, State::StaleDirty, State::Invalid];

    fn index(self) -> usize {
        self as usize
    }

    /// Reads come before writes within an interval.
    fn enter(self, s: IntervalSummary, costs: &CostParams) -> Option<(State, f64)> {
        let (mut state, mut cost) = (self, 0.0);
        if s.has_read {
            match state {
                State::Fresh => {}
                State::StaleDirty => return None,
                State::Invalid => {
                    cost = costs.miss();
                    state = State::Fresh;
                }
            }
        }
        if s.has_write && state == State::Fresh {
            state = State::StaleDirty;
        }
        Some((state, cost))
    }

    fn act(self, action: PolicyAction, costs: &CostParams) -> Option<(State, f64)> {
        match (action, self) {
            (PolicyAction::DoNothing, s) => Some((s, 0.0)),
            (PolicyAction::SendUpdate, _) => Some((State::Fresh, costs.update())),
            (PolicyAction::SendInvalidate, State::Invalid) => None,
            (PolicyAction::SendInvalidate, _) => Some((State::Invalid, costs.invalidate())),
        }
    }
}

const ACTIONS: [PolicyAction; 3] = [
    PolicyAction::DoNothing,
    PolicyAction::SendUpdate,
    PolicyAction::SendInvalidate,
];

fn dp_schedule(seq: &[IntervalSummary], costs: &CostParams) -> KeySchedule {
    let Some((first, rest)) = seq.split_first() else {
        return KeySchedule {
            actions: Vec::new(),
            cost: 0.0,
        };
    };
    let mut best = [f64::INFINITY; 3];
    let (s0, c0) = State::Fresh.enter(*first, costs).expect("a fresh copy serves any read");
    best[s0.index()] = c0;

    // parents[i][state] = (previous state, action at boundary i)
    let mut parents: Vec<[Option<(State, PolicyAction)>; 3]> = Vec::with_capacity(rest.len());
    for s in rest {
        let mut next = [f64::INFINITY; 3];
        let mut parent = [None; 3];
        for from in State::ALL {
            if best[from.index()].is_infinite() {
                continue;
            }
            for action in ACTIONS {
                let Some((mid, ca)) = from.act(action, costs) else {
                    continue;
                };
                let Some((to, ce)) = mid.enter(*s, costs) else { continue };
                let total = best[from.index()] + ca + ce;
                if total < next[to.index()] {
                    next[to.index()] = total;
                    parent[to.index()] = Some((from, action));
                }
            }
        }
        best = next;
        parents.push(parent);
    }

    let (mut state, cost) =
        State::ALL
            .into_iter()
            .map(|s| (s, best[s.index()]))
            .fold(
                (State::Fresh, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            );
    let mut actions = vec![PolicyAction::DoNothing; rest.len()];
    for (i, parent) in parents.iter().enumerate().rev() {
        let (from, action) = parent[state.index()].expect("reachable state has a parent");
        actions[i] = action;
        state = from;
    }
    KeySchedule { actions, cost }
}
