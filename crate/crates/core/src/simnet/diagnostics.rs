use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::automata::ServerSnapshot;
use crate::error::{Error, Result};
use crate::histories::OpKind;
use crate::ids::{OpId, ServerId};
use crate::simnet::engine::{Endpoint, EventKind, ExecutionTrace};

/// Round-trips each invoked operation started.
pub fn round_trip_counts(trace: &ExecutionTrace) -> BTreeMap<OpId, u32> {
    let mut rts: BTreeMap<OpId, BTreeSet<u8>> = BTreeMap::new();
    for e in &trace.events {
        if let (EventKind::Send, Some(op), Some(rt)) = (e.kind, e.op, e.rt) {
            rts.entry(op).or_default().insert(rt);
        }
    }
    rts.into_iter().map(|(op, s)| (op, s.len() as u32)).collect()
}

/// Histogram of round-trips per completed operation, split by kind.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTripSummary {
    pub writes: BTreeMap<u32, usize>,
    pub reads: BTreeMap<u32, usize>,
}

impl RoundTripSummary {
    pub fn of(trace: &ExecutionTrace) -> Self {
        let counts = round_trip_counts(trace);
        let mut out = RoundTripSummary::default();
        for op in trace.history.completed() {
            let n = counts.get(&op.id).copied().unwrap_or(0);
            let bucket = match op.kind {
                OpKind::Write => &mut out.writes,
                OpKind::Read => &mut out.reads,
            };
            *bucket.entry(n).or_default() += 1;
        }
        out
    }

    pub fn merge(&mut self, other: &RoundTripSummary) {
        for (k, v) in &other.writes {
            *self.writes.entry(*k).or_default() += v;
        }
        for (k, v) in &other.reads {
            *self.reads.entry(*k).or_default() += v;
        }
    }

    /// True when every completed read took `reads` and every completed
    /// write `writes` round-trips.
    pub fn uniform(&self, writes: u32, reads: u32) -> bool {
        self.writes.keys().all(|&k| k == writes) && self.reads.keys().all(|&k| k == reads)
    }
}

/// Arrival order at `server` of the update messages of the workload's two
/// writes, as a string over `1` (first write by op id) and `2`. Writes
/// whose update never reached the server are omitted.
pub fn crucial_info(trace: &ExecutionTrace, server: ServerId) -> Result<String> {
    let writes: Vec<OpId> = trace
        .schedule
        .workload
        .iter()
        .enumerate()
        .filter(|(_, w)| w.client.is_writer())
        .map(|(i, _)| OpId(i as u32))
        .collect();
    if writes.len() != 2 {
        return Err(Error::Diagnostic(format!(
            "crucial information needs exactly two writes, workload has {}",
            writes.len()
        )));
    }
    let mut out = String::new();
    let mut seen = BTreeSet::new();
    for e in &trace.events {
        if e.kind != EventKind::Deliver || e.dst != Endpoint::Server(server) || !e.payload.starts_with("update(") {
            continue;
        }
        let Some(op) = e.op else { continue };
        if let Some(idx) = writes.iter().position(|w| *w == op) {
            if seen.insert(op) {
                out.push(if idx == 0 { '1' } else { '2' });
            }
        }
    }
    Ok(out)
}

/// Crucial information for every server, in server order.
pub fn crucial_info_all(trace: &ExecutionTrace) -> Result<Vec<String>> {
    trace.config.server_ids().map(|s| crucial_info(trace, s)).collect()
}

/// Descriptions of every place where a server's log lost a key or a
/// registration, or its current value differs from its largest key.
pub fn append_only_violations(trace: &ExecutionTrace) -> Vec<String> {
    let mut last: BTreeMap<ServerId, &ServerSnapshot> = BTreeMap::new();
    let mut out = Vec::new();
    for rec in &trace.snapshots {
        if let ServerSnapshot::Log { current, vector } = &rec.state {
            if vector.max_value() != Some(*current) {
                out.push(format!("{} at {}: current {current} is not the largest key", rec.server, rec.time));
            }
            if let Some(ServerSnapshot::Log { vector: before, .. }) = last.get(&rec.server) {
                if !vector.extends(before) {
                    out.push(format!("{} at {}: log shrank", rec.server, rec.time));
                }
            }
        }
        last.insert(rec.server, &rec.state);
    }
    out
}

/// A fast read whose returned timestamp is neither the largest timestamp in
/// its acks nor one less.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampGap {
    pub op: OpId,
    pub returned: i64,
    pub max_ts: i64,
}

pub fn timestamp_gaps(trace: &ExecutionTrace) -> Vec<TimestampGap> {
    let mut out = Vec::new();
    for (op, acks) in &trace.evidence {
        let Some(ret) = trace.history.get(*op).and_then(|o| o.value) else { continue };
        let max_ts = acks
            .iter()
            .flat_map(|a| a.vector.values())
            .map(|v| v.ts)
            .max()
            .unwrap_or(0);
        if ret.ts != max_ts && ret.ts != max_ts - 1 {
            out.push(TimestampGap {
                op: *op,
                returned: ret.ts,
                max_ts,
            });
        }
    }
    out
}
