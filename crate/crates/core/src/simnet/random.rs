//! Seeded adversaries. All randomness comes from ChaCha8 seeded with
//! `seed_from_u64(seed)`: stream 0 drives schedules, stream 1 workloads.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automata::{Intent, MAX_ROUNDS};
use crate::histories::Instant;
use crate::ids::{ClientId, ServerId};
use crate::register::SystemConfig;
use crate::simnet::schedule::{Crash, Delivery, Schedule, WorkItem};

const SCHEDULE_STREAM: u64 = 0;
const WORKLOAD_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomParams {
    /// Per-direction delays are uniform in `[1, max_delay]`.
    pub max_delay: u64,
    /// Chance, per round-trip and server, of a skip (while budget remains).
    pub skip_per_mille: u32,
    /// Chance that each of the first `max_crashes` shuffled servers crashes.
    pub crash_per_mille: u32,
    /// Requested crash budget; clamped to `t`.
    pub max_crashes: u32,
    /// Crash instants are uniform in `[0, horizon]`.
    pub horizon: Instant,
}

impl RandomParams {
    pub fn for_config(cfg: &SystemConfig) -> Self {
        RandomParams {
            max_delay: 20,
            skip_per_mille: 150,
            crash_per_mille: 500,
            max_crashes: cfg.crash_tolerance,
            horizon: 200,
        }
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random delivery plan and crash set for `workload`. Crashed servers `C`
/// and the skipped servers `K` of every round-trip satisfy `|K ∪ C| ≤ t`, so
/// every round-trip can always reach `S − t` servers.
pub fn random_schedule(cfg: &SystemConfig, workload: Vec<WorkItem>, params: &RandomParams, seed: u64) -> Schedule {
    let mut rng = rng(seed, SCHEDULE_STREAM);
    let t = cfg.crash_tolerance as usize;
    let mut servers: Vec<ServerId> = cfg.server_ids().collect();
    servers.shuffle(&mut rng);
    let mut crashes = Vec::new();
    for &server in servers.iter().take((params.max_crashes as usize).min(t)) {
        if rng.gen_range(0..1000) < params.crash_per_mille {
            crashes.push(Crash {
                server,
                at: rng.gen_range(0..=params.horizon),
            });
        }
    }
    let crashed: BTreeSet<ServerId> = crashes.iter().map(|c| c.server).collect();
    let max_delay = params.max_delay.max(1);

    let mut plan = Vec::with_capacity(workload.len());
    for _ in &workload {
        let mut rounds = Vec::with_capacity(MAX_ROUNDS);
        for _ in 0..MAX_ROUNDS {
            let mut budget = t - crashed.len();
            let mut row = Vec::with_capacity(cfg.servers as usize);
            for s in cfg.server_ids() {
                let skip = !crashed.contains(&s) && budget > 0 && rng.gen_range(0..1000) < params.skip_per_mille;
                row.push(if skip {
                    budget -= 1;
                    Delivery::Skip
                } else {
                    Delivery::After {
                        request: rng.gen_range(1..=max_delay),
                        reply: rng.gen_range(1..=max_delay),
                    }
                });
            }
            rounds.push(row);
        }
        plan.push(rounds);
    }
    Schedule {
        workload,
        plan,
        crashes,
    }
}

/// `ops` operations by uniformly chosen clients; invocation instants grow by
/// a uniform gap in `[0, max_gap]`.
pub fn random_workload(cfg: &SystemConfig, ops: usize, max_gap: u64, seed: u64) -> Vec<WorkItem> {
    let mut rng = rng(seed, WORKLOAD_STREAM);
    let clients: Vec<ClientId> = cfg.client_ids().collect();
    let mut at = 0;
    (0..ops)
        .map(|_| {
            let client = *clients.choose(&mut rng).expect("at least one client");
            at += rng.gen_range(0..=max_gap);
            WorkItem {
                client,
                intent: if client.is_writer() { Intent::Write } else { Intent::Read },
                invoke_at: at,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SystemConfig {
        SystemConfig::new(5, 2, 2, 1).unwrap()
    }

    #[test]
    fn same_seed_same_schedule() {
        let p = RandomParams::for_config(&cfg());
        let w = random_workload(&cfg(), 10, 5, 42);
        assert_eq!(w, random_workload(&cfg(), 10, 5, 42));
        assert_eq!(random_schedule(&cfg(), w.clone(), &p, 42), random_schedule(&cfg(), w, &p, 42));
    }

    #[test]
    fn generated_schedules_validate_and_keep_quorums() {
        let c = SystemConfig::new(7, 2, 2, 2).unwrap();
        let p = RandomParams {
            skip_per_mille: 500,
            crash_per_mille: 800,
            ..RandomParams::for_config(&c)
        };
        for seed in 0..1000 {
            let s = random_schedule(&c, random_workload(&c, 6, 5, seed), &p, seed);
            s.validate(&c).unwrap();
            let crashed = s.crashed_servers();
            for rounds in &s.plan {
                for row in rounds {
                    let lost = row
                        .iter()
                        .enumerate()
                        .filter(|(i, d)| **d == Delivery::Skip || crashed.contains(&ServerId(*i as u32)))
                        .count();
                    assert!(lost <= c.crash_tolerance as usize);
                }
            }
        }
    }

    #[test]
    fn no_crashes_requested() {
        let p = RandomParams {
            max_crashes: 0,
            crash_per_mille: 1000,
            ..RandomParams::for_config(&cfg())
        };
        for seed in 0..50 {
            assert!(random_schedule(&cfg(), vec![], &p, seed).crashes.is_empty());
        }
    }
}
