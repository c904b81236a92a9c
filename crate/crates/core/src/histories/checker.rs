//! Exact atomicity decision for histories with distinct written values.
//!
//! With distinct values every read has a unique write it must read from, so
//! a legal permutation places each write immediately before a contiguous
//! block holding exactly the reads of its value. The history is atomic iff
//! no read returns an unwritten value, no read precedes its own write, and
//! the precedence graph between these blocks ("clusters") is acyclic.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histories::model::{History, Instant, OpKind, OpRecord};
use crate::ids::OpId;
use crate::register::Value;

/// Proof that no legal permutation exists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    /// A completed read returned a value no write in the history proposed.
    UnwrittenValue { read: OpId, value: Value },
    /// A read responded before the write of its value was invoked.
    ReadBeforeWrite { read: OpId, write: OpId },
    /// Precedence cycle among value clusters. Each step says that cluster
    /// `from` must come before cluster `to` because operation `before` of
    /// the first responds before operation `after` of the second is invoked.
    /// `None` in `before` stands for the virtual initial write.
    Cycle { steps: Vec<CycleStep> },
    /// Exhaustive search found no permutation (oracle verdicts only).
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStep {
    pub from: Value,
    pub to: Value,
    pub before: Option<OpId>,
    pub after: OpId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomicityVerdict {
    /// `witness` lists every completed operation, plus the pending writes
    /// that had to be completed, in a legal sequential order.
    Atomic { witness: Vec<OpId> },
    Violation { certificate: Certificate },
}

impl AtomicityVerdict {
    pub fn is_atomic(&self) -> bool {
        matches!(self, AtomicityVerdict::Atomic { .. })
    }

    pub fn witness(&self) -> Option<&[OpId]> {
        match self {
            AtomicityVerdict::Atomic { witness } => Some(witness),
            AtomicityVerdict::Violation { .. } => None,
        }
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            AtomicityVerdict::Atomic { .. } => None,
            AtomicityVerdict::Violation { certificate } => Some(certificate),
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::UnwrittenValue { read, value } => {
                write!(f, "{read} returns {value}, which no write proposed")
            }
            Certificate::ReadBeforeWrite { read, write } => {
                write!(f, "{read} responds before {write}, whose value it returns, is invoked")
            }
            Certificate::Cycle { steps } => {
                f.write_str("precedence cycle:")?;
                for s in steps {
                    match s.before {
                        Some(b) => write!(f, " [{} -> {}: {b} precedes {}]", s.from, s.to, s.after)?,
                        None => write!(f, " [{} -> {}: initial write precedes {}]", s.from, s.to, s.after)?,
                    }
                }
                Ok(())
            }
            Certificate::Exhausted => f.write_str("no legal permutation exists"),
        }
    }
}

impl fmt::Display for AtomicityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomicityVerdict::Atomic { witness } => {
                f.write_str("atomic; witness:")?;
                for id in witness {
                    write!(f, " {id}")?;
                }
                Ok(())
            }
            AtomicityVerdict::Violation { certificate } => write!(f, "violation; {certificate}"),
        }
    }
}

/// Operations of one value: its write (absent for the initial value) and
/// the completed reads returning it.
struct Cluster<'a> {
    value: Value,
    write: Option<&'a OpRecord>,
    reads: Vec<&'a OpRecord>,
}

impl Cluster<'_> {
    fn members(&self) -> impl Iterator<Item = &OpRecord> + '_ {
        self.write.into_iter().chain(self.reads.iter().copied())
    }

    /// Earliest response in the cluster, with the responding operation.
    fn min_resp(&self) -> Option<(Instant, Option<OpId>)> {
        if self.write.is_none() {
            // The virtual initial write responds before everything.
            return Some((0, None));
        }
        self.members()
            .filter_map(|o| o.response.map(|f| (f, Some(o.id))))
            .min()
    }

    /// Latest invocation in the cluster, with the invoking operation.
    fn max_inv(&self) -> Option<(Instant, OpId)> {
        self.members().map(|o| (o.invoke, o.id)).max()
    }
}

/// The operation pair behind an ordering edge: the op that responded first
/// (absent for the initial value) and the op invoked after it.
type Justification = (Option<OpId>, OpId);

/// Decides atomicity of `h`. Pending reads are ignored. A pending write is
/// completed (at the end of time) when some read returns its value and
/// dropped otherwise; dropping an unread write only removes constraints, so
/// this choice is exact.
pub fn check_atomic(h: &History) -> Result<AtomicityVerdict> {
    h.validate()?;
    let reads: Vec<&OpRecord> = h
        .ops
        .iter()
        .filter(|o| o.kind == OpKind::Read && o.is_complete())
        .collect();
    let returned: BTreeSet<Value> = reads.iter().filter_map(|r| r.value).collect();

    let mut clusters: BTreeMap<Value, Cluster> = BTreeMap::new();
    clusters.insert(
        Value::INITIAL,
        Cluster {
            value: Value::INITIAL,
            write: None,
            reads: Vec::new(),
        },
    );
    for w in h.writes() {
        let Some(v) = w.value else { continue };
        if w.is_complete() || returned.contains(&v) {
            clusters.insert(
                v,
                Cluster {
                    value: v,
                    write: Some(w),
                    reads: Vec::new(),
                },
            );
        }
    }

    for r in &reads {
        let v = r.value.expect("validated: completed reads carry values");
        let Some(c) = clusters.get_mut(&v) else {
            return Ok(AtomicityVerdict::Violation {
                certificate: Certificate::UnwrittenValue { read: r.id, value: v },
            });
        };
        if let Some(w) = c.write {
            if r.precedes(w) {
                return Ok(AtomicityVerdict::Violation {
                    certificate: Certificate::ReadBeforeWrite { read: r.id, write: w.id },
                });
            }
        }
        c.reads.push(r);
    }

    let nodes: Vec<&Cluster> = clusters.values().collect();
    let n = nodes.len();
    // edge[a][b] = justification for "a before b".
    let mut edge: Vec<Vec<Option<Justification>>> = vec![vec![None; n]; n];
    for (a, ca) in nodes.iter().enumerate() {
        let Some((resp, before)) = ca.min_resp() else { continue };
        for (b, cb) in nodes.iter().enumerate() {
            if a == b {
                continue;
            }
            if let Some((inv, after)) = cb.max_inv() {
                if ca.write.is_none() || resp < inv {
                    edge[a][b] = Some((before, after));
                }
            }
        }
    }

    match topological_order(&edge) {
        Some(order) => {
            let mut witness = Vec::new();
            for i in order {
                let c = nodes[i];
                if let Some(w) = c.write {
                    witness.push(w.id);
                }
                let mut rs = c.reads.clone();
                rs.sort_by_key(|r| (r.response, r.id));
                witness.extend(rs.iter().map(|r| r.id));
            }
            Ok(AtomicityVerdict::Atomic { witness })
        }
        None => {
            let cycle = shortest_cycle(&edge).expect("cyclic graph has a cycle");
            let steps = cycle
                .iter()
                .zip(cycle.iter().cycle().skip(1))
                .map(|(&a, &b)| {
                    let (before, after) = edge[a][b].expect("cycle follows edges");
                    CycleStep {
                        from: nodes[a].value,
                        to: nodes[b].value,
                        before,
                        after,
                    }
                })
                .collect();
            Ok(AtomicityVerdict::Violation {
                certificate: Certificate::Cycle { steps },
            })
        }
    }
}

type Edges = Vec<Vec<Option<(Option<OpId>, OpId)>>>;

/// Kahn's algorithm, always taking the smallest ready index so the witness
/// is deterministic.
fn topological_order(edge: &Edges) -> Option<Vec<usize>> {
    let n = edge.len();
    let mut indeg = vec![0usize; n];
    for row in edge {
        for (b, e) in row.iter().enumerate() {
            if e.is_some() {
                indeg[b] += 1;
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(a) = ready.pop_first() {
        order.push(a);
        for (b, e) in edge[a].iter().enumerate() {
            if e.is_some() {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.insert(b);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Shortest directed cycle by BFS from every node; ties go to the smallest
/// starting index.
fn shortest_cycle(edge: &Edges) -> Option<Vec<usize>> {
    let n = edge.len();
    let mut best: Option<Vec<usize>> = None;
    for start in 0..n {
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut found = None;
        'bfs: while let Some(a) = queue.pop_front() {
            for b in 0..n {
                if edge[a][b].is_none() {
                    continue;
                }
                if b == start {
                    found = Some(a);
                    break 'bfs;
                }
                if !seen[b] {
                    seen[b] = true;
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        if let Some(mut last) = found {
            let mut path = vec![last];
            while last != start {
                last = parent[last];
                path.push(last);
            }
            path.reverse();
            if best.as_ref().is_none_or(|b| path.len() < b.len()) {
                best = Some(path);
            }
        }
    }
    best
}

/// Independently re-checks a claimed witness: it must contain every
/// completed operation once, no pending read, respect real-time order, and
/// have every read return the latest preceding write (or the initial value).
pub fn verify_permutation(h: &History, perm: &[OpId]) -> std::result::Result<(), String> {
    let mut pos = BTreeMap::new();
    for (i, id) in perm.iter().enumerate() {
        let op = h.get(*id).ok_or_else(|| format!("{id} is not in the history"))?;
        if op.kind == OpKind::Read && !op.is_complete() {
            return Err(format!("pending read {id} appears in the permutation"));
        }
        if op.kind == OpKind::Write && op.value.is_none() {
            return Err(format!("write {id} without a value appears in the permutation"));
        }
        if pos.insert(*id, i).is_some() {
            return Err(format!("{id} appears twice"));
        }
    }
    for op in h.completed() {
        if !pos.contains_key(&op.id) {
            return Err(format!("completed {} is missing", op.id));
        }
    }
    for a in perm.iter().filter_map(|id| h.get(*id)) {
        for b in perm.iter().filter_map(|id| h.get(*id)) {
            if a.precedes(b) && pos[&a.id] > pos[&b.id] {
                return Err(format!("{} precedes {} in real time but not in the permutation", a.id, b.id));
            }
        }
    }
    let mut current = Value::INITIAL;
    for op in perm.iter().filter_map(|id| h.get(*id)) {
        let v = op.value.expect("checked above");
        match op.kind {
            OpKind::Write => current = v,
            OpKind::Read if v != current => {
                return Err(format!("{} returns {v} but the latest preceding write is {current}", op.id));
            }
            OpKind::Read => {}
        }
    }
    Ok(())
}

/// Largest history the permutation oracle accepts.
pub const ORACLE_MAX_OPS: usize = 8;

/// Exhaustive oracle: tries every completion choice for pending writes and
/// searches all sequential orders consistent with real time.
pub fn brute_force_atomic(h: &History) -> Result<AtomicityVerdict> {
    if h.len() > ORACLE_MAX_OPS {
        return Err(Error::OracleLimit {
            ops: h.len(),
            max: ORACLE_MAX_OPS,
        });
    }
    h.validate()?;
    let fixed: Vec<&OpRecord> = h.completed().collect();
    let optional: Vec<&OpRecord> = h
        .writes()
        .filter(|w| !w.is_complete() && w.value.is_some())
        .collect();
    for choice in 0u32..(1 << optional.len()) {
        let mut ops = fixed.clone();
        ops.extend(
            optional
                .iter()
                .enumerate()
                .filter(|(i, _)| choice >> i & 1 == 1)
                .map(|(_, w)| *w),
        );
        ops.sort_by_key(|o| o.id);
        if let Some(order) = search(&ops) {
            return Ok(AtomicityVerdict::Atomic {
                witness: order.into_iter().map(|i| ops[i].id).collect(),
            });
        }
    }
    Ok(AtomicityVerdict::Violation {
        certificate: Certificate::Exhausted,
    })
}

fn search(ops: &[&OpRecord]) -> Option<Vec<usize>> {
    let n = ops.len();
    let preds: Vec<u32> = (0..n)
        .map(|b| {
            (0..n)
                .filter(|&a| ops[a].precedes(ops[b]))
                .fold(0, |m, a| m | 1 << a)
        })
        .collect();
    let mut dead = BTreeSet::new();
    let mut order = Vec::with_capacity(n);
    dfs(ops, &preds, 0, Value::INITIAL, &mut order, &mut dead).then_some(order)
}

fn dfs(
    ops: &[&OpRecord],
    preds: &[u32],
    placed: u32,
    current: Value,
    order: &mut Vec<usize>,
    dead: &mut BTreeSet<(u32, Value)>,
) -> bool {
    if order.len() == ops.len() {
        return true;
    }
    if dead.contains(&(placed, current)) {
        return false;
    }
    for i in 0..ops.len() {
        if placed >> i & 1 == 1 || preds[i] & !placed != 0 {
            continue;
        }
        let v = ops[i].value.expect("only valued ops are searched");
        let next = match ops[i].kind {
            OpKind::Write => v,
            OpKind::Read if v == current => current,
            OpKind::Read => continue,
        };
        order.push(i);
        if dfs(ops, preds, placed | 1 << i, next, order, dead) {
            return true;
        }
        order.pop();
    }
    dead.insert((placed, current));
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::generate::random_history;
    use crate::histories::model::build::{r, w};
    use proptest::prelude::*;

    fn both(h: &History) -> (AtomicityVerdict, AtomicityVerdict) {
        let fast = check_atomic(h).unwrap();
        let slow = brute_force_atomic(h).unwrap();
        if let Some(p) = fast.witness() {
            verify_permutation(h, p).unwrap();
        }
        if let Some(p) = slow.witness() {
            verify_permutation(h, p).unwrap();
        }
        (fast, slow)
    }

    #[test]
    fn write_then_read_is_atomic() {
        let h = History::new(vec![w(0, 1, 1, 0, Some(5)), r(1, 0, Some(Value::new(1, 1)), 6, Some(9))]);
        let (fast, slow) = both(&h);
        assert!(fast.is_atomic() && slow.is_atomic());
        assert_eq!(fast.witness().unwrap(), &[OpId(0), OpId(1)]);
    }

    #[test]
    fn stale_read_after_two_writes_is_a_violation() {
        let h = History::new(vec![
            w(0, 1, 1, 0, Some(5)),
            w(1, 2, 2, 6, Some(10)),
            r(2, 0, Some(Value::new(1, 1)), 11, Some(15)),
        ]);
        let (fast, slow) = both(&h);
        assert!(!fast.is_atomic() && !slow.is_atomic());
        assert!(matches!(fast.certificate(), Some(Certificate::Cycle { steps }) if steps.len() == 2));
    }

    #[test]
    fn concurrent_writes_either_value_is_atomic() {
        for reader_sees in [1, 2] {
            let h = History::new(vec![
                w(0, 1, 1, 0, Some(10)),
                w(1, 2, 1, 2, Some(8)),
                r(2, 0, Some(Value::new(1, reader_sees)), 11, Some(15)),
            ]);
            let (fast, slow) = both(&h);
            assert!(fast.is_atomic() && slow.is_atomic(), "reader sees w{reader_sees}");
        }
    }

    #[test]
    fn singleton_write_is_atomic() {
        let h = History::new(vec![w(0, 0, 1, 0, Some(1))]);
        assert!(brute_force_atomic(&h).unwrap().is_atomic());
    }

    #[test]
    fn read_of_unwritten_value() {
        let h = History::new(vec![r(0, 0, Some(Value::new(4, 0)), 0, Some(1))]);
        assert_eq!(
            check_atomic(&h).unwrap().certificate(),
            Some(&Certificate::UnwrittenValue {
                read: OpId(0),
                value: Value::new(4, 0)
            })
        );
        assert!(!brute_force_atomic(&h).unwrap().is_atomic());
    }

    #[test]
    fn read_before_its_write() {
        let h = History::new(vec![r(0, 0, Some(Value::new(1, 0)), 0, Some(1)), w(1, 0, 1, 2, Some(3))]);
        assert!(matches!(
            check_atomic(&h).unwrap().certificate(),
            Some(Certificate::ReadBeforeWrite { .. })
        ));
    }

    #[test]
    fn initial_read_after_completed_write_is_a_violation() {
        let h = History::new(vec![w(0, 0, 1, 0, Some(2)), r(1, 0, Some(Value::INITIAL), 3, Some(4))]);
        let (fast, slow) = both(&h);
        assert!(!fast.is_atomic() && !slow.is_atomic());
        match fast.certificate() {
            Some(Certificate::Cycle { steps }) => assert!(steps.iter().any(|s| s.before.is_none())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pending_write_read_by_someone_is_completed() {
        let h = History::new(vec![w(0, 0, 1, 0, None), r(1, 0, Some(Value::new(1, 0)), 3, Some(4))]);
        let (fast, slow) = both(&h);
        assert!(fast.is_atomic() && slow.is_atomic());
        assert_eq!(fast.witness().unwrap(), &[OpId(0), OpId(1)]);
    }

    #[test]
    fn unread_pending_write_is_dropped() {
        let h = History::new(vec![
            w(0, 0, 1, 0, None),
            r(1, 0, Some(Value::INITIAL), 3, Some(4)),
        ]);
        let (fast, slow) = both(&h);
        assert!(fast.is_atomic() && slow.is_atomic());
        assert_eq!(fast.witness().unwrap(), &[OpId(1)]);
    }

    #[test]
    fn new_old_inversion_between_reads() {
        let h = History::new(vec![
            w(0, 0, 1, 0, Some(100)),
            r(1, 0, Some(Value::new(1, 0)), 1, Some(2)),
            r(2, 1, Some(Value::INITIAL), 3, Some(4)),
        ]);
        let (fast, slow) = both(&h);
        assert!(!fast.is_atomic() && !slow.is_atomic());
    }

    #[test]
    fn oracle_refuses_large_histories() {
        let ops = (0..9).map(|i| w(i, 0, i as i64 + 1, 10 * i as u64, Some(10 * i as u64 + 1))).collect();
        assert!(matches!(
            brute_force_atomic(&History::new(ops)),
            Err(Error::OracleLimit { ops: 9, max: 8 })
        ));
    }

    #[test]
    fn malformed_history_is_an_error() {
        let h = History::new(vec![w(0, 0, 1, 5, Some(5))]);
        assert!(matches!(check_atomic(&h), Err(Error::MalformedHistory(_))));
    }

    #[test]
    fn verify_rejects_bad_witnesses() {
        let h = History::new(vec![w(0, 1, 1, 0, Some(5)), r(1, 0, Some(Value::new(1, 1)), 6, Some(9))]);
        assert!(verify_permutation(&h, &[OpId(1), OpId(0)]).is_err());
        assert!(verify_permutation(&h, &[OpId(0)]).is_err());
        assert!(verify_permutation(&h, &[OpId(0), OpId(1), OpId(1)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn checker_matches_oracle(seed in any::<u64>()) {
            let h = random_history(seed, ORACLE_MAX_OPS);
            let (fast, slow) = both(&h);
            prop_assert_eq!(fast.is_atomic(), slow.is_atomic(), "{:?}", h);
        }

        #[test]
        fn dropping_pending_ops_keeps_atomicity(seed in any::<u64>()) {
            let h = random_history(seed, ORACLE_MAX_OPS);
            if check_atomic(&h).unwrap().is_atomic() {
                // Dropping a pending write somebody read from would orphan
                // that read, so only drop the unread ones.
                let read: BTreeSet<Value> = h.completed().filter(|o| o.kind == OpKind::Read).filter_map(|r| r.value).collect();
                let kept = History::new(h.ops.iter().filter(|o| {
                    o.is_complete() || o.value.is_some_and(|v| read.contains(&v))
                }).cloned().collect());
                prop_assert!(check_atomic(&kept).unwrap().is_atomic());
            }
        }
    }
}
