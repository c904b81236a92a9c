use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::ClientId;
use crate::register::{Value, ValueVector};

/// Append-only server state shared by the fast-read and ABD servers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerState {
    val: Value,
    vector: ValueVector,
}

impl Default for ServerState {
    fn default() -> Self {
        ServerState {
            val: Value::INITIAL,
            vector: ValueVector::initial(),
        }
    }
}

impl ServerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current maximum value (`val_i`).
    pub fn current(&self) -> Value {
        self.val
    }

    pub fn vector(&self) -> &ValueVector {
        &self.vector
    }

    /// A larger value starts a fresh entry `{c}` and becomes current; any
    /// other value gains `c` in its updated set, created on demand.
    pub fn update(&mut self, val: Value, c: ClientId) {
        if val > self.val {
            self.vector.reset(val, c);
            self.val = val;
        } else {
            self.vector.register(val, c);
        }
    }

    pub fn on_write(&mut self, val: Value, w: ClientId) {
        self.update(val, w);
    }

    /// Registers every carried value for `r`, then registers `r` against
    /// every held value, and returns the full vector.
    pub fn on_read(&mut self, val_queue: &BTreeSet<Value>, r: ClientId) -> ValueVector {
        for v in val_queue {
            self.update(*v, r);
        }
        self.vector.register_all(r);
        self.vector.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W1: ClientId = ClientId::Writer(1);
    const W2: ClientId = ClientId::Writer(2);
    const R1: ClientId = ClientId::Reader(1);
    const R2: ClientId = ClientId::Reader(2);

    fn set(cs: &[ClientId]) -> BTreeSet<ClientId> {
        cs.iter().copied().collect()
    }

    #[test]
    fn update_sequence() {
        let mut s = ServerState::new();
        let v = Value::new(1, 1);
        s.update(v, W1);
        assert_eq!(s.current(), v);
        assert_eq!(s.vector().updated(&v), Some(&set(&[W1])));

        s.update(v, R1);
        assert_eq!(s.current(), v);
        assert_eq!(s.vector().updated(&v), Some(&set(&[W1, R1])));

        s.update(Value::INITIAL, R2);
        assert_eq!(s.vector().updated(&Value::INITIAL), Some(&set(&[R2])));
        assert_eq!(s.vector().updated(&v), Some(&set(&[W1, R1])));
        assert_eq!(s.current(), v);
    }

    #[test]
    fn fresh_write() {
        let mut s = ServerState::new();
        s.on_write(Value::new(1, 1), W1);
        let expected: ValueVector = [
            (Value::INITIAL, BTreeSet::new()),
            (Value::new(1, 1), set(&[W1])),
        ]
        .into_iter()
        .collect();
        assert_eq!(s.vector(), &expected);
    }

    #[test]
    fn stale_write_keeps_current() {
        let mut s = ServerState::new();
        s.on_write(Value::new(2, 2), W2);
        s.on_write(Value::new(1, 1), W1);
        assert_eq!(s.current(), Value::new(2, 2));
        // The stale value is still logged.
        assert_eq!(s.vector().updated(&Value::new(1, 1)), Some(&set(&[W1])));
    }

    #[test]
    fn duplicate_write_is_idempotent() {
        let mut s = ServerState::new();
        s.on_write(Value::new(1, 1), W1);
        let before = s.clone();
        s.on_write(Value::new(1, 1), W1);
        assert_eq!(s, before);
    }

    #[test]
    fn fresh_read_registers_reader() {
        let mut s = ServerState::new();
        let v = s.on_read(&BTreeSet::from([Value::INITIAL]), R1);
        assert_eq!(v, [(Value::INITIAL, set(&[R1]))].into_iter().collect());
    }

    #[test]
    fn read_registers_on_values_not_carried() {
        let mut s = ServerState::new();
        s.on_write(Value::new(1, 1), W1);
        let v = s.on_read(&BTreeSet::from([Value::INITIAL]), R1);
        assert_eq!(v.updated(&Value::new(1, 1)), Some(&set(&[W1, R1])));
    }

    #[test]
    fn read_carries_unseen_value_in() {
        let mut s = ServerState::new();
        let carried = Value::new(3, 2);
        let v = s.on_read(&BTreeSet::from([Value::INITIAL, carried]), R1);
        assert!(v.contains(&carried));
        assert_eq!(s.current(), carried);
        assert_eq!(v.updated(&carried), Some(&set(&[R1])));
    }
}
