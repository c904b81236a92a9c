use std::collections::BTreeSet;

use crate::automata::{ClientAutomaton, ClientStep, Intent, Outcome, Reply, Request};
use crate::error::{Error, Result};
use crate::ids::{OpId, ServerId};
use crate::register::{max_admissible, ReadAck, SystemConfig, Value};

/// Replies collected for the round-trip in progress.
#[derive(Debug)]
struct Round {
    op: OpId,
    rt: u8,
    from: BTreeSet<ServerId>,
}

impl Round {
    fn new(op: OpId, rt: u8) -> Self {
        Round {
            op,
            rt,
            from: BTreeSet::new(),
        }
    }

    /// Records a reply; false for stale or duplicate ones.
    fn accept(&mut self, op: OpId, rt: u8, server: ServerId) -> bool {
        op == self.op && rt == self.rt && self.from.insert(server)
    }
}

fn wrong_intent(expected: &str) -> Error {
    Error::InvalidSchedule(format!("this client only performs {expected} operations"))
}

fn unexpected(reply: &Reply) -> Error {
    Error::ProtocolInvariant(format!("unexpected reply {reply}"))
}

#[derive(Debug)]
enum WriterPhase {
    Idle,
    Query { round: Round, max_ts: i64 },
    Update { round: Round, val: Value },
}

/// Query-then-update writer: learns the largest timestamp from `S − t`
/// servers, then installs `(maxTS + 1, w)` on `S − t` servers.
#[derive(Debug)]
pub struct TwoPhaseWriter {
    id: u32,
    quorum: usize,
    ts: i64,
    phase: WriterPhase,
}

impl TwoPhaseWriter {
    pub fn new(id: u32, cfg: &SystemConfig) -> Self {
        TwoPhaseWriter {
            id,
            quorum: cfg.quorum(),
            ts: 0,
            phase: WriterPhase::Idle,
        }
    }

    /// Timestamp of the last value this writer proposed.
    pub fn ts(&self) -> i64 {
        self.ts
    }
}

impl ClientAutomaton for TwoPhaseWriter {
    fn invoke(&mut self, op: OpId, intent: Intent) -> Result<Request> {
        if intent != Intent::Write {
            return Err(wrong_intent("write"));
        }
        self.phase = WriterPhase::Query {
            round: Round::new(op, 0),
            max_ts: 0,
        };
        Ok(Request::Query)
    }

    fn deliver(&mut self, op: OpId, rt: u8, server: ServerId, reply: &Reply) -> Result<ClientStep> {
        match &mut self.phase {
            WriterPhase::Idle => Ok(ClientStep::Wait),
            WriterPhase::Query { round, max_ts } => {
                if !round.accept(op, rt, server) {
                    return Ok(ClientStep::Wait);
                }
                let seen = match reply {
                    Reply::Vector(v) => v.values().map(|v| v.ts).max().unwrap_or(0),
                    Reply::Latest(v) => v.ts,
                    Reply::Ack => return Err(unexpected(reply)),
                };
                *max_ts = (*max_ts).max(seen);
                if round.from.len() < self.quorum {
                    return Ok(ClientStep::Wait);
                }
                let val = Value::new(*max_ts + 1, self.id);
                debug_assert!(val.ts > self.ts, "writer timestamps must increase");
                self.ts = val.ts;
                self.phase = WriterPhase::Update {
                    round: Round::new(op, rt + 1),
                    val,
                };
                Ok(ClientStep::Broadcast(Request::Update(val)))
            }
            WriterPhase::Update { round, val } => {
                if !round.accept(op, rt, server) {
                    return Ok(ClientStep::Wait);
                }
                if round.from.len() < self.quorum {
                    return Ok(ClientStep::Wait);
                }
                let value = *val;
                self.phase = WriterPhase::Idle;
                Ok(ClientStep::Done(Outcome {
                    value,
                    evidence: Vec::new(),
                }))
            }
        }
    }
}

/// Single round-trip writer stamping values with a private counter.
#[derive(Debug)]
pub struct NaiveWriter {
    id: u32,
    quorum: usize,
    counter: i64,
    pending: Option<(Round, Value)>,
}

impl NaiveWriter {
    pub fn new(id: u32, cfg: &SystemConfig) -> Self {
        NaiveWriter {
            id,
            quorum: cfg.quorum(),
            counter: 0,
            pending: None,
        }
    }
}

impl ClientAutomaton for NaiveWriter {
    fn invoke(&mut self, op: OpId, intent: Intent) -> Result<Request> {
        if intent != Intent::Write {
            return Err(wrong_intent("write"));
        }
        self.counter += 1;
        let val = Value::new(self.counter, self.id);
        self.pending = Some((Round::new(op, 0), val));
        Ok(Request::Update(val))
    }

    fn deliver(&mut self, op: OpId, rt: u8, server: ServerId, _reply: &Reply) -> Result<ClientStep> {
        let Some((round, val)) = &mut self.pending else {
            return Ok(ClientStep::Wait);
        };
        if !round.accept(op, rt, server) || round.from.len() < self.quorum {
            return Ok(ClientStep::Wait);
        }
        let value = *val;
        self.pending = None;
        Ok(ClientStep::Done(Outcome {
            value,
            evidence: Vec::new(),
        }))
    }
}

/// One round-trip reader: sends its value queue, collects `S − t` full
/// vectors and returns the largest admissible value.
#[derive(Debug)]
pub struct FastReader {
    cfg: SystemConfig,
    val_queue: BTreeSet<Value>,
    pending: Option<(Round, Vec<ReadAck>)>,
}

impl FastReader {
    pub fn new(_id: u32, cfg: &SystemConfig) -> Self {
        FastReader {
            cfg: *cfg,
            val_queue: BTreeSet::from([Value::INITIAL]),
            pending: None,
        }
    }

    pub fn val_queue(&self) -> &BTreeSet<Value> {
        &self.val_queue
    }
}

impl ClientAutomaton for FastReader {
    fn invoke(&mut self, op: OpId, intent: Intent) -> Result<Request> {
        if intent != Intent::Read {
            return Err(wrong_intent("read"));
        }
        self.pending = Some((Round::new(op, 0), Vec::new()));
        Ok(Request::Read(self.val_queue.clone()))
    }

    fn deliver(&mut self, op: OpId, rt: u8, server: ServerId, reply: &Reply) -> Result<ClientStep> {
        let Some((round, acks)) = &mut self.pending else {
            return Ok(ClientStep::Wait);
        };
        if !round.accept(op, rt, server) {
            return Ok(ClientStep::Wait);
        }
        let Reply::Vector(vector) = reply else {
            return Err(unexpected(reply));
        };
        acks.push(ReadAck::new(server, vector.clone()));
        if acks.len() < self.cfg.quorum() {
            return Ok(ClientStep::Wait);
        }
        let (_, acks) = self.pending.take().expect("pending read");
        for ack in &acks {
            self.val_queue.extend(ack.vector.values().copied());
        }
        let (value, _witness) = max_admissible(&acks, &self.cfg)?;
        self.val_queue.insert(value);
        Ok(ClientStep::Done(Outcome {
            value,
            evidence: acks,
        }))
    }
}

#[derive(Debug)]
enum ReaderPhase {
    Idle,
    Query { round: Round, max: Value },
    WriteBack { round: Round, val: Value },
}

/// Two round-trip reader: query for the maximum, write it back, return it.
#[derive(Debug)]
pub struct AbdReader {
    quorum: usize,
    phase: ReaderPhase,
}

impl AbdReader {
    pub fn new(_id: u32, cfg: &SystemConfig) -> Self {
        AbdReader {
            quorum: cfg.quorum(),
            phase: ReaderPhase::Idle,
        }
    }
}

impl ClientAutomaton for AbdReader {
    fn invoke(&mut self, op: OpId, intent: Intent) -> Result<Request> {
        if intent != Intent::Read {
            return Err(wrong_intent("read"));
        }
        self.phase = ReaderPhase::Query {
            round: Round::new(op, 0),
            max: Value::INITIAL,
        };
        Ok(Request::Query)
    }

    fn deliver(&mut self, op: OpId, rt: u8, server: ServerId, reply: &Reply) -> Result<ClientStep> {
        match &mut self.phase {
            ReaderPhase::Idle => Ok(ClientStep::Wait),
            ReaderPhase::Query { round, max } => {
                if !round.accept(op, rt, server) {
                    return Ok(ClientStep::Wait);
                }
                let seen = match reply {
                    Reply::Latest(v) => *v,
                    Reply::Vector(v) => v.max_value().unwrap_or(Value::INITIAL),
                    Reply::Ack => return Err(unexpected(reply)),
                };
                *max = (*max).max(seen);
                if round.from.len() < self.quorum {
                    return Ok(ClientStep::Wait);
                }
                let val = *max;
                self.phase = ReaderPhase::WriteBack {
                    round: Round::new(op, rt + 1),
                    val,
                };
                Ok(ClientStep::Broadcast(Request::Update(val)))
            }
            ReaderPhase::WriteBack { round, val } => {
                if !round.accept(op, rt, server) || round.from.len() < self.quorum {
                    return Ok(ClientStep::Wait);
                }
                let value = *val;
                self.phase = ReaderPhase::Idle;
                Ok(ClientStep::Done(Outcome {
                    value,
                    evidence: Vec::new(),
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::ClientId;
    use crate::register::ValueVector;

    fn cfg() -> SystemConfig {
        SystemConfig::new(5, 2, 2, 1).unwrap()
    }

    #[test]
    fn writer_on_fresh_system_writes_ts_one() {
        let mut w = TwoPhaseWriter::new(1, &cfg());
        assert_eq!(w.invoke(OpId(0), Intent::Write).unwrap(), Request::Query);
        let reply = Reply::Vector(ValueVector::initial());
        for s in 0..3 {
            assert_eq!(w.deliver(OpId(0), 0, ServerId(s), &reply).unwrap(), ClientStep::Wait);
        }
        // Duplicate from the same server does not count.
        assert_eq!(w.deliver(OpId(0), 0, ServerId(2), &reply).unwrap(), ClientStep::Wait);
        let step = w.deliver(OpId(0), 0, ServerId(4), &reply).unwrap();
        assert_eq!(step, ClientStep::Broadcast(Request::Update(Value::new(1, 1))));
        for s in 0..3 {
            assert_eq!(w.deliver(OpId(0), 1, ServerId(s), &Reply::Ack).unwrap(), ClientStep::Wait);
        }
        // Late query reply is stale.
        assert_eq!(w.deliver(OpId(0), 0, ServerId(3), &reply).unwrap(), ClientStep::Wait);
        match w.deliver(OpId(0), 1, ServerId(3), &Reply::Ack).unwrap() {
            ClientStep::Done(o) => assert_eq!(o.value, Value::new(1, 1)),
            other => panic!("{other:?}"),
        }
        assert_eq!(w.ts(), 1);
    }

    #[test]
    fn writer_takes_max_over_quorum() {
        let mut w = TwoPhaseWriter::new(0, &cfg());
        w.invoke(OpId(7), Intent::Write).unwrap();
        let mut big = ValueVector::initial();
        big.register(Value::new(3, 1), ClientId::Writer(1));
        let mut last = ClientStep::Wait;
        for s in 0..4 {
            let reply = if s == 2 { Reply::Vector(big.clone()) } else { Reply::Vector(ValueVector::initial()) };
            last = w.deliver(OpId(7), 0, ServerId(s), &reply).unwrap();
        }
        assert_eq!(last, ClientStep::Broadcast(Request::Update(Value::new(4, 0))));
    }

    #[test]
    fn writer_rejects_read_intent() {
        let mut w = TwoPhaseWriter::new(0, &cfg());
        assert!(w.invoke(OpId(0), Intent::Read).is_err());
        let mut r = FastReader::new(0, &cfg());
        assert!(r.invoke(OpId(0), Intent::Write).is_err());
    }

    #[test]
    fn naive_writer_counts_locally() {
        let mut w = NaiveWriter::new(0, &cfg());
        assert_eq!(w.invoke(OpId(0), Intent::Write).unwrap(), Request::Update(Value::new(1, 0)));
        for s in 0..4 {
            w.deliver(OpId(0), 0, ServerId(s), &Reply::Ack).unwrap();
        }
        assert_eq!(w.invoke(OpId(1), Intent::Write).unwrap(), Request::Update(Value::new(2, 0)));
    }

    #[test]
    fn fast_reader_returns_initial_on_fresh_system() {
        let mut r = FastReader::new(0, &cfg());
        let req = r.invoke(OpId(0), Intent::Read).unwrap();
        assert_eq!(req, Request::Read(BTreeSet::from([Value::INITIAL])));
        let mut vector = ValueVector::initial();
        vector.register(Value::INITIAL, ClientId::Reader(0));
        let mut step = ClientStep::Wait;
        for s in 0..4 {
            step = r.deliver(OpId(0), 0, ServerId(s), &Reply::Vector(vector.clone())).unwrap();
        }
        match step {
            ClientStep::Done(o) => {
                assert_eq!(o.value, Value::INITIAL);
                assert_eq!(o.evidence.len(), 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn abd_reader_writes_back_max() {
        let mut r = AbdReader::new(0, &cfg());
        r.invoke(OpId(0), Intent::Read).unwrap();
        let mut step = ClientStep::Wait;
        for s in 0..4 {
            let v = if s == 1 { Value::new(2, 1) } else { Value::new(1, 0) };
            step = r.deliver(OpId(0), 0, ServerId(s), &Reply::Latest(v)).unwrap();
        }
        assert_eq!(step, ClientStep::Broadcast(Request::Update(Value::new(2, 1))));
    }
}
