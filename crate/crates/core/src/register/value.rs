use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::{ClientId, ServerId};

/// Identity of the writer that proposed a value. `Bottom` tags the initial
/// value and sorts below every real writer (variant order drives `Ord`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WriterId {
    Bottom,
    Id(u32),
}

/// A register value: timestamp plus proposing writer, ordered
/// lexicographically so equal timestamps fall back to writer order.
///
/// The timestamp is signed only so that externally produced histories with
/// corrupt (negative) timestamps can be represented and flagged; no protocol
/// in this crate ever produces one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Value {
    pub ts: i64,
    pub wid: WriterId,
}

impl Value {
    pub const INITIAL: Value = Value {
        ts: 0,
        wid: WriterId::Bottom,
    };

    pub fn new(ts: i64, writer: u32) -> Self {
        Value {
            ts,
            wid: WriterId::Id(writer),
        }
    }

    pub fn is_initial(&self) -> bool {
        *self == Value::INITIAL
    }
}

pub fn value_compare(a: &Value, b: &Value) -> Ordering {
    a.cmp(b)
}

impl fmt::Display for WriterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WriterId::Bottom => f.write_str("_"),
            WriterId::Id(i) => write!(f, "w{i}"),
        }
    }
}

/// Compact textual form `ts:wid`, e.g. `3:w1` or `0:_`.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.ts, self.wid)
    }
}

impl FromStr for Value {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (ts, wid) = s.split_once(':').ok_or_else(|| format!("bad value `{s}`"))?;
        let ts = ts.parse().map_err(|_| format!("bad timestamp in `{s}`"))?;
        let wid = match wid {
            "_" => WriterId::Bottom,
            w => WriterId::Id(
                w.strip_prefix('w')
                    .and_then(|i| i.parse().ok())
                    .ok_or_else(|| format!("bad writer id in `{s}`"))?,
            ),
        };
        Ok(Value { ts, wid })
    }
}

/// Full-information server log: every value ever seen with the set of
/// clients registered against it. Keys never disappear.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueVector(BTreeMap<Value, BTreeSet<ClientId>>);

impl ValueVector {
    /// The vector a fresh server starts with: `(0,⊥) ↦ ∅`.
    pub fn initial() -> Self {
        let mut v = ValueVector::default();
        v.0.insert(Value::INITIAL, BTreeSet::new());
        v
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.0.contains_key(v)
    }

    pub fn updated(&self, v: &Value) -> Option<&BTreeSet<ClientId>> {
        self.0.get(v)
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> + '_ {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Value, &BTreeSet<ClientId>)> + '_ {
        self.0.iter()
    }

    pub fn max_value(&self) -> Option<Value> {
        self.0.keys().next_back().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Registers `client` against `v`, creating the entry if needed.
    pub fn register(&mut self, v: Value, client: ClientId) {
        self.0.entry(v).or_default().insert(client);
    }

    /// Adds `v` with an empty updated set unless already present.
    pub fn ensure(&mut self, v: Value) {
        self.0.entry(v).or_default();
    }

    /// Inserts `v` with exactly `{client}` as its updated set.
    pub fn reset(&mut self, v: Value, client: ClientId) {
        self.0.insert(v, BTreeSet::from([client]));
    }

    pub fn remove(&mut self, v: &Value) {
        self.0.remove(v);
    }

    pub fn register_all(&mut self, client: ClientId) {
        for set in self.0.values_mut() {
            set.insert(client);
        }
    }

    /// True when every key and registration of `earlier` survives in `self`.
    pub fn extends(&self, earlier: &ValueVector) -> bool {
        earlier.0.iter().all(|(v, set)| {
            self.0
                .get(v)
                .is_some_and(|now| set.is_subset(now))
        })
    }
}

impl FromIterator<(Value, BTreeSet<ClientId>)> for ValueVector {
    fn from_iter<I: IntoIterator<Item = (Value, BTreeSet<ClientId>)>>(iter: I) -> Self {
        ValueVector(iter.into_iter().collect())
    }
}

/// `{0:_<>,1:w0<w0,r1>}`
impl fmt::Display for ValueVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, set)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}<")?;
            for (j, c) in set.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(">")?;
        }
        f.write_str("}")
    }
}

/// A server's reply to a fast read: the sender and its full value vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadAck {
    pub server: ServerId,
    pub vector: ValueVector,
}

impl ReadAck {
    pub fn new(server: ServerId, vector: ValueVector) -> Self {
        ReadAck { server, vector }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn timestamp_dominates() {
        assert_eq!(value_compare(&Value::new(1, 1), &Value::new(2, 1)), Ordering::Less);
    }

    #[test]
    fn equal_timestamps_fall_back_to_writer() {
        assert_eq!(value_compare(&Value::new(3, 1), &Value::new(3, 2)), Ordering::Less);
    }

    #[test]
    fn initial_is_reflexive_and_least_writer() {
        assert_eq!(value_compare(&Value::INITIAL, &Value::INITIAL), Ordering::Equal);
        assert!(Value { ts: 0, wid: WriterId::Bottom } < Value::new(0, 0));
    }

    #[test]
    fn text_form() {
        for s in ["0:_", "3:w1", "-1:w0"] {
            assert_eq!(s.parse::<Value>().unwrap().to_string(), s);
        }
        assert!("3".parse::<Value>().is_err());
        assert!("3:x1".parse::<Value>().is_err());
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        (0i64..6, prop::option::of(0u32..4)).prop_map(|(ts, w)| Value {
            ts,
            wid: w.map_or(WriterId::Bottom, WriterId::Id),
        })
    }

    proptest! {
        #[test]
        fn total_order(a in arb_value(), b in arb_value(), c in arb_value()) {
            let ab = value_compare(&a, &b);
            prop_assert_eq!(ab, value_compare(&b, &a).reverse());
            prop_assert_eq!(ab == Ordering::Equal, a == b);
            if ab != Ordering::Greater && value_compare(&b, &c) != Ordering::Greater {
                prop_assert_ne!(value_compare(&a, &c), Ordering::Greater);
            }
            // Matches the explicit lexicographic definition.
            let lex = a.ts < b.ts || (a.ts == b.ts && a.wid < b.wid);
            prop_assert_eq!(ab == Ordering::Less, lex);
        }
    }
}
