use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ClientId, OpId};
use crate::register::Value;

/// Logical instant on the simulator's global clock.
pub type Instant = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Write,
    Read,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::Write => "write",
            OpKind::Read => "read",
        })
    }
}

/// One invoked operation. `value` is the written value for writes (known
/// once the write has proposed it) and the returned value for completed
/// reads; `response` is `None` while pending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpRecord {
    pub id: OpId,
    pub client: ClientId,
    pub kind: OpKind,
    pub value: Option<Value>,
    pub invoke: Instant,
    pub response: Option<Instant>,
    pub round_trips: u32,
}

impl OpRecord {
    pub fn is_complete(&self) -> bool {
        self.response.is_some()
    }

    /// `self ≺ other` in real time.
    pub fn precedes(&self, other: &OpRecord) -> bool {
        self.response.is_some_and(|f| f < other.invoke)
    }

    pub fn concurrent(&self, other: &OpRecord) -> bool {
        !self.precedes(other) && !other.precedes(self)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    pub ops: Vec<OpRecord>,
}

impl History {
    pub fn new(ops: Vec<OpRecord>) -> Self {
        History { ops }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn get(&self, id: OpId) -> Option<&OpRecord> {
        self.ops.iter().find(|o| o.id == id)
    }

    pub fn completed(&self) -> impl Iterator<Item = &OpRecord> + '_ {
        self.ops.iter().filter(|o| o.is_complete())
    }

    pub fn writes(&self) -> impl Iterator<Item = &OpRecord> + '_ {
        self.ops.iter().filter(|o| o.kind == OpKind::Write)
    }

    pub fn reads(&self) -> impl Iterator<Item = &OpRecord> + '_ {
        self.ops.iter().filter(|o| o.kind == OpKind::Read)
    }

    /// Structural checks every checker relies on: unique ids, ordered
    /// intervals, values on completed operations, distinct written values,
    /// and per-client sequential operations.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedHistory(m));
        let mut ids = BTreeMap::new();
        let mut written = BTreeMap::new();
        for op in &self.ops {
            if ids.insert(op.id, ()).is_some() {
                return bad(format!("duplicate operation id {}", op.id));
            }
            if let Some(f) = op.response {
                if f <= op.invoke {
                    return bad(format!("{} responds at {f}, not after its invocation at {}", op.id, op.invoke));
                }
                if op.value.is_none() {
                    return bad(format!("completed {} has no value", op.id));
                }
            }
            if op.kind == OpKind::Write {
                if op.client.is_reader() {
                    return bad(format!("{} is a write issued by reader {}", op.id, op.client));
                }
                if let Some(v) = op.value {
                    if v.is_initial() {
                        return bad(format!("{} writes the initial value", op.id));
                    }
                    if let Some(prev) = written.insert(v, op.id) {
                        return bad(format!("{} and {} both write {v}", prev, op.id));
                    }
                }
            } else if op.client.is_writer() {
                return bad(format!("{} is a read issued by writer {}", op.id, op.client));
            }
        }
        if !check_wellformed(self) {
            return bad("some client has overlapping operations".to_string());
        }
        Ok(())
    }
}

/// True iff no client has two overlapping operations.
pub fn check_wellformed(h: &History) -> bool {
    let mut by_client: BTreeMap<ClientId, Vec<&OpRecord>> = BTreeMap::new();
    for op in &h.ops {
        by_client.entry(op.client).or_default().push(op);
    }
    by_client.values_mut().all(|ops| {
        ops.sort_by_key(|o| o.invoke);
        ops.windows(2).all(|w| w[0].precedes(w[1]))
    })
}

#[cfg(test)]
pub(crate) mod build {
    //! Terse constructors for hand-written histories.
    use super::*;

    pub fn w(id: u32, writer: u32, ts: i64, s: Instant, f: Option<Instant>) -> OpRecord {
        OpRecord {
            id: OpId(id),
            client: ClientId::Writer(writer),
            kind: OpKind::Write,
            value: Some(Value::new(ts, writer)),
            invoke: s,
            response: f,
            round_trips: 2,
        }
    }

    pub fn r(id: u32, reader: u32, ret: Option<Value>, s: Instant, f: Option<Instant>) -> OpRecord {
        OpRecord {
            id: OpId(id),
            client: ClientId::Reader(reader),
            kind: OpKind::Read,
            value: ret,
            invoke: s,
            response: f,
            round_trips: 1,
        }
    }
}
