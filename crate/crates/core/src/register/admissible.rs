//! The degree-`a` admissibility predicate used by fast reads.
//!
//! A value `v` is admissible with degree `a` over a set of read acks when
//! some non-empty subset `μ` of those acks all carry `v`, `|μ| ≥ S − a·t`,
//! and at least `a` clients appear in every `updated` set of `v` across `μ`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ClientId, ServerId};
use crate::register::{ReadAck, SystemConfig, Value};

/// Exhaustive enumeration is used, so the number of acks carrying the value
/// is capped.
pub const ENUMERATION_CAP: usize = 16;

/// Certificate that `value` is admissible with `degree` over some acks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibilityWitness {
    pub value: Value,
    pub degree: u32,
    /// Senders of the acks forming `μ`.
    pub mu: Vec<ServerId>,
    /// Intersection of `updated` sets of `value` over `μ`.
    pub pi: BTreeSet<ClientId>,
}

impl AdmissibilityWitness {
    /// Re-derives the three defining inequalities from `msgs`.
    pub fn verify(&self, msgs: &[ReadAck], cfg: &SystemConfig) -> bool {
        if self.mu.is_empty() {
            return false;
        }
        let need = required_size(self.degree, cfg);
        if (self.mu.len() as i64) < need {
            return false;
        }
        let mut pi: Option<BTreeSet<ClientId>> = None;
        for s in &self.mu {
            let Some(ack) = msgs.iter().find(|m| m.server == *s) else {
                return false;
            };
            let Some(set) = ack.vector.updated(&self.value) else {
                return false;
            };
            pi = Some(match pi {
                None => set.clone(),
                Some(acc) => acc.intersection(set).copied().collect(),
            });
        }
        let pi = pi.unwrap_or_default();
        pi.len() as u32 >= self.degree && pi == self.pi
    }
}

fn required_size(degree: u32, cfg: &SystemConfig) -> i64 {
    i64::from(cfg.servers) - i64::from(degree) * i64::from(cfg.crash_tolerance)
}

/// Decides admissibility of `v` with degree `a` by enumerating every subset
/// of the acks that carry `v`. Subsets are visited in increasing bitmask
/// order, so the returned witness is deterministic.
pub fn admissible(
    v: &Value,
    msgs: &[ReadAck],
    a: u32,
    cfg: &SystemConfig,
) -> Result<Option<AdmissibilityWitness>> {
    let max = cfg.max_degree();
    if a < 1 || a > max {
        return Err(Error::DegreeOutOfRange { degree: a, max });
    }
    let carriers: Vec<(ServerId, &BTreeSet<ClientId>)> = msgs
        .iter()
        .filter_map(|m| m.vector.updated(v).map(|set| (m.server, set)))
        .collect();
    if carriers.len() > ENUMERATION_CAP {
        return Err(Error::EnumerationCap(carriers.len()));
    }
    // μ must be non-empty even when S − a·t ≤ 0.
    let need = required_size(a, cfg).max(1);
    if (carriers.len() as i64) < need {
        return Ok(None);
    }

    for mask in 1u32..(1u32 << carriers.len()) {
        if i64::from(mask.count_ones()) < need {
            continue;
        }
        let mut members = (0..carriers.len()).filter(|i| mask & (1 << i) != 0);
        let first = members.next().expect("mask is non-zero");
        let mut pi = carriers[first].1.clone();
        for i in members {
            pi.retain(|c| carriers[i].1.contains(c));
            if (pi.len() as u32) < a {
                break;
            }
        }
        if pi.len() as u32 >= a {
            let mu = (0..carriers.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| carriers[i].0)
                .collect();
            return Ok(Some(AdmissibilityWitness {
                value: *v,
                degree: a,
                mu,
                pi,
            }));
        }
    }
    Ok(None)
}

/// Returns the largest admissible value: test the current maximum at every
/// degree in `[1, R+1]`; if none succeeds, erase it from every ack and
/// repeat.
pub fn max_admissible(msgs: &[ReadAck], cfg: &SystemConfig) -> Result<(Value, AdmissibilityWitness)> {
    let mut acks = msgs.to_vec();
    loop {
        let Some(candidate) = acks.iter().filter_map(|m| m.vector.max_value()).max() else {
            return Err(Error::ProtocolInvariant(
                "no admissible value among collected acks".into(),
            ));
        };
        for a in 1..=cfg.max_degree() {
            if let Some(w) = admissible(&candidate, &acks, a, cfg)? {
                return Ok((candidate, w));
            }
        }
        for ack in &mut acks {
            ack.vector.remove(&candidate);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::register::ValueVector;
    use proptest::prelude::*;

    fn cfg(s: u32, t: u32, r: u32) -> SystemConfig {
        SystemConfig::new(s, 2, r, t).unwrap()
    }

    fn ack(server: u32, entries: &[(Value, &[ClientId])]) -> ReadAck {
        let mut vector = ValueVector::initial();
        for (v, set) in entries {
            vector.ensure(*v);
            for c in *set {
                vector.register(*v, *c);
            }
        }
        ReadAck::new(ServerId(server), vector)
    }

    /// Independent oracle: scan every subset of *all* acks and keep those
    /// whose members all carry `v`.
    fn oracle(v: &Value, msgs: &[ReadAck], a: u32, cfg: &SystemConfig) -> bool {
        let need = (i64::from(cfg.servers) - i64::from(a * cfg.crash_tolerance)).max(1);
        (1u32..(1 << msgs.len())).any(|mask| {
            let mu: Vec<&ReadAck> = (0..msgs.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| &msgs[i])
                .collect();
            if (mu.len() as i64) < need || !mu.iter().all(|m| m.vector.contains(v)) {
                return false;
            }
            let inter = mu.iter().skip(1).fold(
                mu[0].vector.updated(v).unwrap().clone(),
                |acc, m| acc.intersection(m.vector.updated(v).unwrap()).copied().collect(),
            );
            inter.len() as u32 >= a
        })
    }

    const R1: ClientId = ClientId::Reader(1);

    #[test]
    fn four_carriers_degree_one() {
        let c = cfg(5, 1, 2);
        let v = Value::new(2, 0);
        let msgs: Vec<_> = (0..4).map(|s| ack(s, &[(v, &[R1])])).collect();
        assert!(oracle(&v, &msgs, 1, &c));
        let w = admissible(&v, &msgs, 1, &c).unwrap().expect("admissible");
        assert_eq!(w.mu.len(), 4);
        assert!(w.pi.contains(&R1));
        assert!(w.verify(&msgs, &c));
    }

    #[test]
    fn empty_msgs_never_admissible() {
        let c = cfg(5, 1, 2);
        for a in 1..=3 {
            assert_eq!(admissible(&Value::INITIAL, &[], a, &c).unwrap(), None);
        }
    }

    #[test]
    fn too_few_carriers_at_degree_two() {
        let c = cfg(5, 1, 2);
        let v = Value::new(1, 0);
        let w0 = ClientId::Writer(0);
        let mut msgs: Vec<_> = (0..2).map(|s| ack(s, &[(v, &[w0, R1])])).collect();
        msgs.extend((2..4).map(|s| ack(s, &[])));
        assert!(!oracle(&v, &msgs, 2, &c));
        assert_eq!(admissible(&v, &msgs, 2, &c).unwrap(), None);
    }

    #[test]
    fn degree_range_is_checked() {
        let c = cfg(5, 1, 2);
        assert!(matches!(
            admissible(&Value::INITIAL, &[], 0, &c),
            Err(Error::DegreeOutOfRange { .. })
        ));
        assert!(matches!(
            admissible(&Value::INITIAL, &[], 4, &c),
            Err(Error::DegreeOutOfRange { degree: 4, max: 3 })
        ));
    }

    #[test]
    fn initial_only_acks_return_initial() {
        let c = cfg(5, 1, 2);
        let r0 = ClientId::Reader(0);
        let msgs: Vec<_> = (0..4).map(|s| ack(s, &[(Value::INITIAL, &[r0])])).collect();
        let (v, w) = max_admissible(&msgs, &c).unwrap();
        assert_eq!(v, Value::INITIAL);
        assert_eq!(w.degree, 1);
    }

    #[test]
    fn completed_write_is_returned_at_degree_one() {
        let c = cfg(5, 1, 2);
        let v = Value::new(5, 2);
        let w2 = ClientId::Writer(2);
        let r0 = ClientId::Reader(0);
        let msgs: Vec<_> = (0..4).map(|s| ack(s, &[(v, &[w2, r0])])).collect();
        let (got, w) = max_admissible(&msgs, &c).unwrap();
        assert_eq!(got, v);
        assert_eq!(w.degree, 1);
    }

    #[test]
    fn falls_back_to_second_largest() {
        // (2,w0) reached a single server; (1,w0) completed everywhere.
        let c = cfg(5, 1, 2);
        let r0 = ClientId::Reader(0);
        let w0 = ClientId::Writer(0);
        let old = Value::new(1, 0);
        let new = Value::new(2, 0);
        let mut msgs = vec![ack(0, &[(old, &[w0, r0]), (new, &[w0, r0])])];
        msgs.extend((1..4).map(|s| ack(s, &[(old, &[w0, r0])])));
        for a in 1..=3 {
            assert!(!oracle(&new, &msgs, a, &c));
        }
        assert!(oracle(&old, &msgs, 1, &c));
        let (got, w) = max_admissible(&msgs, &c).unwrap();
        assert_eq!(got, old);
        assert!(w.verify(&msgs, &c));
    }

    #[test]
    fn no_value_at_all_is_an_invariant_violation() {
        let c = cfg(5, 1, 2);
        let empty = ReadAck::new(ServerId(0), ValueVector::default());
        assert!(matches!(
            max_admissible(&[empty], &c),
            Err(Error::ProtocolInvariant(_))
        ));
    }

    fn arb_acks(servers: u32) -> impl Strategy<Value = Vec<ReadAck>> {
        let clients = [
            ClientId::Writer(0),
            ClientId::Writer(1),
            ClientId::Reader(0),
            ClientId::Reader(1),
        ];
        let values = [Value::INITIAL, Value::new(1, 0), Value::new(1, 1), Value::new(2, 0)];
        prop::collection::vec(
            prop::collection::vec((0usize..4, prop::collection::btree_set(0usize..4, 0..4)), 0..4),
            1..=servers as usize,
        )
        .prop_map(move |servers| {
            servers
                .into_iter()
                .enumerate()
                .map(|(i, entries)| {
                    let mut vector = ValueVector::initial();
                    for (v, set) in entries {
                        vector.ensure(values[v]);
                        for c in set {
                            vector.register(values[v], clients[c]);
                        }
                    }
                    ReadAck::new(ServerId(i as u32), vector)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn agrees_with_oracle(msgs in arb_acks(6), a in 1u32..=3, pick in 0usize..4) {
            let c = cfg(6, 1, 2);
            let v = [Value::INITIAL, Value::new(1, 0), Value::new(1, 1), Value::new(2, 0)][pick];
            let got = admissible(&v, &msgs, a, &c).unwrap();
            prop_assert_eq!(got.is_some(), oracle(&v, &msgs, a, &c));
            if let Some(w) = got {
                prop_assert!(w.verify(&msgs, &c));
            }
        }

        #[test]
        fn monotone_in_evidence(msgs in arb_acks(6), extra in arb_acks(3), a in 1u32..=3) {
            let c = cfg(9, 1, 2);
            let v = Value::INITIAL;
            let mut more = msgs.clone();
            for (i, mut m) in extra.into_iter().enumerate() {
                m.server = ServerId(100 + i as u32);
                more.push(m);
            }
            if admissible(&v, &msgs, a, &c).unwrap().is_some() {
                prop_assert!(admissible(&v, &more, a, &c).unwrap().is_some());
            }
        }

        #[test]
        fn max_admissible_matches_literal_loop(msgs in arb_acks(5)) {
            let c = cfg(5, 1, 2);
            // Literal replay with the oracle as the predicate.
            let mut acks = msgs.clone();
            let expected = loop {
                let Some(max) = acks.iter().filter_map(|m| m.vector.max_value()).max() else {
                    break None;
                };
                if (1..=3).any(|a| oracle(&max, &acks, a, &c)) {
                    break Some(max);
                }
                for m in &mut acks {
                    m.vector.remove(&max);
                }
            };
            match max_admissible(&msgs, &c) {
                Ok((v, w)) => {
                    prop_assert_eq!(Some(v), expected);
                    prop_assert!(w.verify(&msgs, &c));
                }
                Err(_) => prop_assert_eq!(expected, None),
            }
        }
    }
}
