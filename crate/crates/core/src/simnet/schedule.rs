use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::automata::{Intent, MAX_ROUNDS};
use crate::error::{Error, Result};
use crate::histories::Instant;
use crate::ids::{ClientId, OpId, ServerId};
use crate::register::SystemConfig;

/// Fate of one round-trip's messages between one client and one server.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Delivery {
    /// The request arrives `request` ticks after it is sent and the reply
    /// `reply` ticks after the server handles it. Both are at least 1.
    After { request: u64, reply: u64 },
    /// Both directions are held back past the end of the execution.
    Skip,
}

impl Delivery {
    pub const FAST: Delivery = Delivery::After { request: 1, reply: 1 };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkItem {
    pub client: ClientId,
    pub intent: Intent,
    /// Earliest invocation instant. A client still busy at that time starts
    /// the operation one tick after its current one responds.
    pub invoke_at: Instant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Crash {
    pub server: ServerId,
    pub at: Instant,
}

/// Complete adversary for one execution. Operation `i` is `workload[i]`;
/// `plan[i][rt][s]` governs its round-trip `rt` with server `s`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub workload: Vec<WorkItem>,
    pub plan: Vec<Vec<Vec<Delivery>>>,
    pub crashes: Vec<Crash>,
}

impl Schedule {
    /// Every message of every operation delivered after one tick.
    pub fn skip_free(cfg: &SystemConfig, workload: Vec<WorkItem>) -> Self {
        let plan = vec![vec![vec![Delivery::FAST; cfg.servers as usize]; MAX_ROUNDS]; workload.len()];
        Schedule {
            workload,
            plan,
            crashes: Vec::new(),
        }
    }

    pub fn delivery(&self, op: OpId, rt: u8, server: ServerId) -> Option<Delivery> {
        self.plan
            .get(op.0 as usize)?
            .get(rt as usize)?
            .get(server.0 as usize)
            .copied()
    }

    pub fn set(&mut self, op: OpId, rt: u8, server: ServerId, d: Delivery) {
        self.plan[op.0 as usize][rt as usize][server.0 as usize] = d;
    }

    pub fn crashed_servers(&self) -> BTreeSet<ServerId> {
        self.crashes.iter().map(|c| c.server).collect()
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSchedule(m));
        for (i, item) in self.workload.iter().enumerate() {
            if !cfg.has_client(item.client) {
                return bad(format!("op{i}: unknown client {}", item.client));
            }
            let ok = match item.intent {
                Intent::Write => item.client.is_writer(),
                Intent::Read => item.client.is_reader(),
            };
            if !ok {
                return bad(format!("op{i}: {} cannot perform {:?}", item.client, item.intent));
            }
        }
        if self.plan.len() != self.workload.len() {
            return bad(format!(
                "delivery plan covers {} operations, workload has {}",
                self.plan.len(),
                self.workload.len()
            ));
        }
        for (i, rounds) in self.plan.iter().enumerate() {
            if rounds.len() != MAX_ROUNDS {
                return bad(format!("op{i}: plan has {} round-trips, expected {MAX_ROUNDS}", rounds.len()));
            }
            for (rt, row) in rounds.iter().enumerate() {
                if row.len() != cfg.servers as usize {
                    return bad(format!("op{i} rt{rt}: plan has {} servers, expected {}", row.len(), cfg.servers));
                }
                for d in row {
                    if let Delivery::After { request, reply } = d {
                        if *request == 0 || *reply == 0 {
                            return bad(format!("op{i} rt{rt}: delays must be at least 1"));
                        }
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for c in &self.crashes {
            if c.server.0 >= cfg.servers {
                return bad(format!("crash of unknown server {}", c.server));
            }
            if !seen.insert(c.server) {
                return bad(format!("server {} crashes twice", c.server));
            }
        }
        if seen.len() > cfg.crash_tolerance as usize {
            return bad(format!(
                "{} crashes exceed the tolerance t = {}",
                seen.len(),
                cfg.crash_tolerance
            ));
        }
        Ok(())
    }
}
