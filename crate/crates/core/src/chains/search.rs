use std::fmt;

use serde::Serialize;

use crate::automata::ProtocolKind;
use crate::chains::build::{
    build_chain_alpha, build_chain_beta, critical_from_traces, return_label, BetaVariant, ReturnLabel, R1, R2,
};
use crate::error::{Error, Result};
use crate::histories::{check_atomic, Certificate};
use crate::ids::{ClientId, OpId};
use crate::register::SystemConfig;
use crate::simnet::{
    crucial_info_all, random_schedule, random_workload, run, Endpoint, EventKind, ExecutionTrace, RandomParams,
};

/// One delivered reply as the observer sees it.
type Seen<'a> = (Endpoint, Option<OpId>, Option<u8>, &'a str);

/// Partitions trace indices by what `observer` saw: the ordered sequence of
/// replies delivered to it, compared by sender, operation, round-trip and
/// content (not by time). Classes are ordered by first member.
pub fn indistinguishability_classes(traces: &[ExecutionTrace], observer: ClientId) -> Vec<Vec<usize>> {
    let mut classes: Vec<(Vec<Seen>, Vec<usize>)> = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        let view: Vec<_> = t
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Deliver && e.dst == Endpoint::Client(observer))
            .map(|e| (e.src, e.op, e.rt, e.payload.as_str()))
            .collect();
        match classes.iter_mut().find(|(v, _)| *v == view) {
            Some((_, members)) => members.push(i),
            None => classes.push((view, vec![i])),
        }
    }
    classes.into_iter().map(|(_, m)| m).collect()
}

/// Where in the search an execution came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Origin {
    Alpha(u32),
    Beta { variant: BetaVariant, skip_critical: bool, element: u32 },
    Seed(u64),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Alpha(i) => write!(f, "alpha[{i}]"),
            Origin::Beta {
                variant,
                skip_critical,
                element,
            } => write!(f, "{variant}{}[{element}]", if *skip_critical { "+skip" } else { "" }),
            Origin::Seed(s) => write!(f, "seed {s}"),
        }
    }
}

/// Evidence that the protocol is not an atomic register.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Finding {
    /// One execution's history fails the atomicity check.
    NotAtomic { origin: Origin, certificate: Certificate },
    /// Two executions the observer cannot tell apart, yet it returned
    /// different values.
    Indistinguishable {
        first: Origin,
        second: Origin,
        observer: ClientId,
        returns: (ReturnLabel, ReturnLabel),
    },
}

/// A finding together with the execution(s) behind it.
#[derive(Clone, Debug)]
pub struct FoundViolation {
    pub finding: Finding,
    pub traces: Vec<ExecutionTrace>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSummary {
    pub name: String,
    /// Per element: `R1`'s return, then `R2`'s when present.
    pub returns: Vec<Vec<ReturnLabel>>,
    /// Per element, per server.
    pub crucial: Vec<Vec<String>>,
    /// Indistinguishability classes for the last read of the chain.
    pub classes: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub protocol: ProtocolKind,
    pub config: SystemConfig,
    pub chains: Vec<ChainSummary>,
    /// Critical index on chain α, when the chain's ends disagree.
    pub critical: Option<u32>,
    pub seeds_examined: u64,
    pub found: Option<FoundViolation>,
}

impl SearchReport {
    pub fn exhausted(&self) -> bool {
        self.found.is_none()
    }
}

/// Operations and adversary used for the randomized supplement.
pub const SEARCH_OPS: usize = 8;
pub const SEARCH_MAX_GAP: u64 = 6;

/// Looks for an execution refuting atomicity of a one-round-trip-write
/// protocol: chain α, then every β variant, then the same-view consistency
/// check across all β executions, then seeds `0..budget`. The first finding
/// in that order wins, independent of thread timing.
pub fn contradiction_search(cfg: &SystemConfig, protocol: ProtocolKind, budget: u64) -> Result<SearchReport> {
    if protocol.write_rounds() != 1 {
        return Err(Error::NotFastWrite(protocol.name().to_string()));
    }
    let mut report = SearchReport {
        protocol,
        config: *cfg,
        chains: Vec::new(),
        critical: None,
        seeds_examined: 0,
        found: None,
    };

    let alpha = build_chain_alpha(cfg)?
        .iter()
        .map(|s| run(cfg, protocol, s))
        .collect::<Result<Vec<_>>>()?;
    report.chains.push(summarize("alpha", &alpha, &[R1])?);
    if let Some(found) = first_violation(&alpha, Origin::Alpha)? {
        report.found = Some(found);
        return Ok(report);
    }
    let i1 = critical_from_traces(alpha).ok().map(|r| r.index);
    report.critical = i1;

    if let Some(i1) = i1 {
        let mut betas: Vec<(Origin, ExecutionTrace)> = Vec::new();
        for variant in [BetaVariant::Prime, BetaVariant::DoublePrime] {
            for skip_critical in [false, true] {
                let traces = build_chain_beta(cfg, i1, variant, skip_critical)?
                    .iter()
                    .map(|s| run(cfg, protocol, s))
                    .collect::<Result<Vec<_>>>()?;
                let name = Origin::Beta {
                    variant,
                    skip_critical,
                    element: 0,
                }
                .to_string()
                .replace("[0]", "");
                report.chains.push(summarize(&name, &traces, &[R1, R2])?);
                let origin = |element| Origin::Beta {
                    variant,
                    skip_critical,
                    element,
                };
                if let Some(found) = first_violation(&traces, origin)? {
                    report.found = Some(found);
                    return Ok(report);
                }
                betas.extend(traces.into_iter().enumerate().map(|(j, t)| (origin(j as u32), t)));
            }
        }
        let traces: Vec<ExecutionTrace> = betas.iter().map(|(_, t)| t.clone()).collect();
        for (observer, op) in [(ClientId::Reader(1), R2), (ClientId::Reader(0), R1)] {
            for class in indistinguishability_classes(&traces, observer) {
                let ret = |i: usize| return_label(&traces[i], op);
                if let Some(&other) = class.iter().find(|&&i| ret(i) != ret(class[0])) {
                    report.found = Some(FoundViolation {
                        finding: Finding::Indistinguishable {
                            first: betas[class[0]].0.clone(),
                            second: betas[other].0.clone(),
                            observer,
                            returns: (ret(class[0]), ret(other)),
                        },
                        traces: vec![traces[class[0]].clone(), traces[other].clone()],
                    });
                    return Ok(report);
                }
            }
        }
    }

    let params = RandomParams::for_config(cfg);
    let attempt = |seed: u64| -> Option<Result<FoundViolation>> {
        let schedule = random_schedule(cfg, random_workload(cfg, SEARCH_OPS, SEARCH_MAX_GAP, seed), &params, seed);
        let trace = match run(cfg, protocol, &schedule) {
            Ok(t) => t,
            Err(e) => return Some(Err(e)),
        };
        match check_atomic(&trace.history) {
            Ok(v) => v.certificate().cloned().map(|certificate| {
                Ok(FoundViolation {
                    finding: Finding::NotAtomic {
                        origin: Origin::Seed(seed),
                        certificate,
                    },
                    traces: vec![trace],
                })
            }),
            Err(e) => Some(Err(e)),
        }
    };
    let hit = find_first_seed(budget, attempt);
    match hit {
        Some((seed, found)) => {
            report.seeds_examined = seed + 1;
            report.found = Some(found?);
        }
        None => report.seeds_examined = budget,
    }
    Ok(report)
}

#[cfg(feature = "parallel")]
fn find_first_seed<F>(budget: u64, attempt: F) -> Option<(u64, Result<FoundViolation>)>
where
    F: Fn(u64) -> Option<Result<FoundViolation>> + Sync,
{
    use rayon::prelude::*;
    (0..budget)
        .into_par_iter()
        .filter_map(|seed| attempt(seed).map(|r| (seed, r)))
        .find_first(|_| true)
}

#[cfg(not(feature = "parallel"))]
fn find_first_seed<F>(budget: u64, attempt: F) -> Option<(u64, Result<FoundViolation>)>
where
    F: Fn(u64) -> Option<Result<FoundViolation>>,
{
    (0..budget).find_map(|seed| attempt(seed).map(|r| (seed, r)))
}

fn first_violation(traces: &[ExecutionTrace], origin: impl Fn(u32) -> Origin) -> Result<Option<FoundViolation>> {
    for (i, t) in traces.iter().enumerate() {
        if let Some(certificate) = check_atomic(&t.history)?.certificate() {
            return Ok(Some(FoundViolation {
                finding: Finding::NotAtomic {
                    origin: origin(i as u32),
                    certificate: certificate.clone(),
                },
                traces: vec![t.clone()],
            }));
        }
    }
    Ok(None)
}

fn summarize(name: &str, traces: &[ExecutionTrace], reads: &[OpId]) -> Result<ChainSummary> {
    let observer = if reads.contains(&R2) { ClientId::Reader(1) } else { ClientId::Reader(0) };
    Ok(ChainSummary {
        name: name.to_string(),
        returns: traces
            .iter()
            .map(|t| reads.iter().map(|&r| return_label(t, r)).collect())
            .collect(),
        crucial: traces.iter().map(crucial_info_all).collect::<Result<_>>()?,
        classes: indistinguishability_classes(traces, observer),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::build::build_chain_alpha;

    fn cfg(s: u32) -> SystemConfig {
        SystemConfig::new(s, 2, 2, 1).unwrap()
    }

    #[test]
    fn two_round_write_protocols_are_rejected() {
        for p in [ProtocolKind::W2r1, ProtocolKind::W2r2Abd] {
            assert!(matches!(contradiction_search(&cfg(5), p, 10), Err(Error::NotFastWrite(_))));
        }
    }

    #[test]
    fn naive_is_refuted_at_three_servers() {
        let rep = contradiction_search(&cfg(3), ProtocolKind::W1r2Naive, 1000).unwrap();
        let found = rep.found.expect("violation");
        match &found.finding {
            Finding::NotAtomic { certificate, .. } => {
                let v = check_atomic(&found.traces[0].history).unwrap();
                assert_eq!(v.certificate(), Some(certificate));
            }
            Finding::Indistinguishable { .. } => panic!("deterministic protocol"),
        }
    }

    #[test]
    fn budget_zero_still_runs_chains() {
        let rep = contradiction_search(&cfg(3), ProtocolKind::W1r2Naive, 0).unwrap();
        assert!(!rep.chains.is_empty());
        assert_eq!(rep.chains[0].returns.len(), 4);
    }

    #[test]
    fn identical_schedules_share_a_class() {
        let c = cfg(3);
        let chain = build_chain_alpha(&c).unwrap();
        let t = run(&c, ProtocolKind::W1r2Naive, &chain[0]).unwrap();
        assert_eq!(indistinguishability_classes(&[t.clone(), t], ClientId::Reader(0)), vec![vec![0, 1]]);
    }

    #[test]
    fn naive_alpha_head_and_next_differ_for_reader() {
        let c = cfg(3);
        let chain = build_chain_alpha(&c).unwrap();
        let ts: Vec<_> = chain[..2].iter().map(|s| run(&c, ProtocolKind::W1r2Naive, s).unwrap()).collect();
        assert_eq!(indistinguishability_classes(&ts, ClientId::Reader(0)).len(), 2);
    }
}
