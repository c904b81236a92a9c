use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::histories::model::{History, OpKind, OpRecord};
use crate::ids::{ClientId, OpId};
use crate::register::Value;

const WRITERS: u32 = 3;
const READERS: u32 = 3;

/// Random well-formed history with at most `max_ops` operations over three
/// writers and three readers, on a short time axis so operations overlap
/// often. Roughly one operation in eight stays pending (blocking its
/// client), and reads mostly return some value written anywhere in the
/// history, so stale, future and initial-value reads all occur. A few reads
/// return a value nobody wrote.
pub fn random_history(seed: u64, max_ops: usize) -> History {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(0..=max_ops);
    let clients: Vec<ClientId> = (0..WRITERS)
        .map(ClientId::Writer)
        .chain((0..READERS).map(ClientId::Reader))
        .collect();
    let mut free_at = vec![Some(0u64); clients.len()];
    let mut ops = Vec::with_capacity(n);
    let mut ts = 0i64;
    for id in 0..n as u32 {
        let open: Vec<usize> = (0..clients.len()).filter(|&c| free_at[c].is_some()).collect();
        let Some(&c) = open.choose(&mut rng) else { break };
        let invoke = free_at[c].expect("open client") + rng.gen_range(0..6);
        let response = (!rng.gen_ratio(1, 8)).then(|| invoke + rng.gen_range(1..8));
        free_at[c] = response.map(|f| f + 1);
        let client = clients[c];
        let (kind, value) = match client {
            ClientId::Writer(w) => {
                ts += rng.gen_range(1..3);
                (OpKind::Write, Some(Value::new(ts, w)))
            }
            ClientId::Reader(_) => (OpKind::Read, None),
        };
        ops.push(OpRecord {
            id: OpId(id),
            client,
            kind,
            value,
            invoke,
            response,
            round_trips: if kind == OpKind::Write { 2 } else { 1 },
        });
    }
    let mut pool: Vec<Value> = ops.iter().filter_map(|o| o.value).collect();
    pool.push(Value::INITIAL);
    for op in ops.iter_mut() {
        if op.kind == OpKind::Read && op.response.is_some() {
            op.value = Some(if rng.gen_ratio(1, 20) {
                Value::new(1000, 0)
            } else {
                *pool.choose(&mut rng).expect("pool holds the initial value")
            });
        }
    }
    History::new(ops)
}
