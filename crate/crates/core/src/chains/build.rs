use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automata::{Intent, ProtocolKind};
use crate::error::{Error, Result};
use crate::histories::Instant;
use crate::ids::{ClientId, OpId, ServerId};
use crate::register::{SystemConfig, Value};
use crate::simnet::{run, Delivery, ExecutionTrace, Schedule, WorkItem};

/// The distinguished operations shared by every chain schedule.
pub const W1: OpId = OpId(0);
pub const W2: OpId = OpId(1);
pub const R1: OpId = OpId(2);
pub const R2: OpId = OpId(3);

const W1_AT: Instant = 0;
const W2_AT: Instant = 10;
const R1_AT: Instant = 1000;
const R2_AT: Instant = R1_AT + 1;
/// Base unit for the slow side of a swapped write.
const SLOW: u64 = 100;

/// What a chain read returned, named by the operation that wrote it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReturnLabel {
    /// The value of `W1`.
    One,
    /// The value of `W2`.
    Two,
    Initial,
    Other(Value),
    /// The read did not complete.
    Pending,
}

impl fmt::Display for ReturnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnLabel::One => f.write_str("1"),
            ReturnLabel::Two => f.write_str("2"),
            ReturnLabel::Initial => f.write_str("0"),
            ReturnLabel::Other(v) => write!(f, "{v}"),
            ReturnLabel::Pending => f.write_str("pending"),
        }
    }
}

/// Labels the value `op` returned in `trace`.
pub fn return_label(trace: &ExecutionTrace, op: OpId) -> ReturnLabel {
    let h = &trace.history;
    let Some(v) = h.get(op).filter(|o| o.is_complete()).and_then(|o| o.value) else {
        return ReturnLabel::Pending;
    };
    let written = |w: OpId| h.get(w).and_then(|o| o.value);
    if v.is_initial() {
        ReturnLabel::Initial
    } else if written(W1) == Some(v) {
        ReturnLabel::One
    } else if written(W2) == Some(v) {
        ReturnLabel::Two
    } else {
        ReturnLabel::Other(v)
    }
}

fn check_shape(cfg: &SystemConfig) -> Result<()> {
    if cfg.servers < 3 {
        return Err(Error::ChainPrecondition(format!(
            "chains need at least 3 servers, got {}",
            cfg.servers
        )));
    }
    if cfg.writers < 2 || cfg.readers < 2 {
        return Err(Error::ChainPrecondition("chains need two writers and two readers".into()));
    }
    Ok(())
}

fn slow(rt: usize) -> Delivery {
    Delivery::After {
        request: (2 * rt as u64 + 1) * SLOW,
        reply: 1,
    }
}

fn alpha(cfg: &SystemConfig, swapped: u32) -> Schedule {
    let workload = vec![
        WorkItem {
            client: ClientId::Writer(0),
            intent: Intent::Write,
            invoke_at: W1_AT,
        },
        WorkItem {
            client: ClientId::Writer(1),
            intent: Intent::Write,
            invoke_at: W2_AT,
        },
        WorkItem {
            client: ClientId::Reader(0),
            intent: Intent::Read,
            invoke_at: R1_AT,
        },
    ];
    let mut s = Schedule::skip_free(cfg, workload);
    for server in 0..cfg.servers {
        let late = if server < swapped { W1 } else { W2 };
        for rt in 0..s.plan[late.0 as usize].len() {
            s.set(late, rt as u8, ServerId(server), slow(rt));
        }
    }
    s
}

/// Chain α: element `i` delivers `W2`'s messages before `W1`'s on servers
/// `s0..s(i-1)` and `W1`'s first elsewhere, followed by a skip-free read
/// `R1`. Each write is slowed, never skipped, on the servers where it comes
/// second, so write order flips one server per step while the writes stay
/// concurrent and `R1` runs after both.
pub fn build_chain_alpha(cfg: &SystemConfig) -> Result<Vec<Schedule>> {
    check_shape(cfg)?;
    Ok((0..=cfg.servers).map(|i| alpha(cfg, i)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BetaVariant {
    /// Extends `α_{i1−1}`.
    Prime,
    /// Extends `α_{i1}`.
    DoublePrime,
}

impl fmt::Display for BetaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetaVariant::Prime => "beta'",
            BetaVariant::DoublePrime => "beta''",
        })
    }
}

/// Chain β over the α element selected by `variant`. Each element adds a
/// second read `R2` whose first round-trip lands between `R1`'s two; element
/// `j` delivers `R2`'s second round-trip before `R1`'s on servers
/// `s0..s(j-1)` and after it elsewhere. With `skip_critical`, both of `R2`'s
/// round-trips skip the critical server `s(i1-1)` in every element.
pub fn build_chain_beta(
    cfg: &SystemConfig,
    i1: u32,
    variant: BetaVariant,
    skip_critical: bool,
) -> Result<Vec<Schedule>> {
    check_shape(cfg)?;
    if i1 == 0 || i1 > cfg.servers {
        return Err(Error::ChainPrecondition(format!(
            "critical index {i1} outside [1, {}]",
            cfg.servers
        )));
    }
    let base = alpha(
        cfg,
        match variant {
            BetaVariant::Prime => i1 - 1,
            BetaVariant::DoublePrime => i1,
        },
    );
    let critical = ServerId(i1 - 1);
    Ok((0..=cfg.servers)
        .map(|j| {
            let mut s = base.clone();
            s.workload.push(WorkItem {
                client: ClientId::Reader(1),
                intent: Intent::Read,
                invoke_at: R2_AT,
            });
            s.plan.push(s.plan[R1.0 as usize].clone());
            for server in 0..cfg.servers {
                let early = server < j;
                let at = ServerId(server);
                s.set(R1, 1, at, Delivery::After { request: if early { 30 } else { 10 }, reply: 1 });
                s.set(R2, 1, at, Delivery::After { request: if early { 5 } else { 20 }, reply: 1 });
            }
            if skip_critical {
                s.set(R2, 0, critical, Delivery::Skip);
                s.set(R2, 1, critical, Delivery::Skip);
            }
            s
        })
        .collect())
}

/// Where the chain's first read changes its answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalServerReport {
    /// Index `i1` of the first element whose return differs from its
    /// predecessor's; the critical server is `s(i1-1)`.
    pub index: u32,
    pub server: ServerId,
    pub returns: Vec<ReturnLabel>,
    pub before: ExecutionTrace,
    pub after: ExecutionTrace,
}

/// Runs every element and locates the first flip of `R1`'s return.
pub fn find_critical_server(
    cfg: &SystemConfig,
    protocol: ProtocolKind,
    chain: &[Schedule],
) -> Result<CriticalServerReport> {
    let traces = chain.iter().map(|s| run(cfg, protocol, s)).collect::<Result<Vec<_>>>()?;
    critical_from_traces(traces)
}

pub(crate) fn critical_from_traces(mut traces: Vec<ExecutionTrace>) -> Result<CriticalServerReport> {
    let returns: Vec<ReturnLabel> = traces.iter().map(|t| return_label(t, R1)).collect();
    let (Some(first), Some(last)) = (returns.first(), returns.last()) else {
        return Err(Error::ChainPrecondition("empty chain".into()));
    };
    if first == last {
        return Err(Error::ChainPrecondition(format!(
            "the read returns {first} at both ends of the chain"
        )));
    }
    let i = (1..returns.len())
        .find(|&i| returns[i] != returns[i - 1])
        .expect("ends differ, so some neighbours differ");
    let after = traces.swap_remove(i);
    let before = traces.swap_remove(i - 1);
    Ok(CriticalServerReport {
        index: i as u32,
        server: ServerId(i as u32 - 1),
        returns,
        before,
        after,
    })
}
