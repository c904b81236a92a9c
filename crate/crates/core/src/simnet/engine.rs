use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automata::{
    ClientAutomaton, ClientStep, Intent, ProtocolKind, Reply, Request, ServerAutomaton, ServerSnapshot,
};
use crate::error::{Error, Result};
use crate::histories::{History, Instant, OpKind, OpRecord};
use crate::ids::{ClientId, OpId, ServerId};
use crate::register::{ReadAck, SystemConfig, Value};
use crate::simnet::schedule::{Delivery, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Invoke,
    /// A client broadcasts one round-trip's request.
    Send,
    /// A request (to a server) or reply (to a client) arrives.
    Deliver,
    /// A request reaches a crashed server and is lost with it.
    Drop,
    /// A round-trip's exchange with one server is held back forever.
    Skip,
    Respond,
    Crash,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Invoke => "invoke",
            EventKind::Send => "send",
            EventKind::Deliver => "deliver",
            EventKind::Drop => "drop",
            EventKind::Skip => "skip",
            EventKind::Respond => "respond",
            EventKind::Crash => "crash",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            EventKind::Invoke,
            EventKind::Send,
            EventKind::Deliver,
            EventKind::Drop,
            EventKind::Skip,
            EventKind::Respond,
            EventKind::Crash,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    Client(ClientId),
    Server(ServerId),
    /// Every server (broadcast).
    All,
    None,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Client(c) => write!(f, "{c}"),
            Endpoint::Server(s) => write!(f, "{s}"),
            Endpoint::All => f.write_str("*"),
            Endpoint::None => f.write_str("-"),
        }
    }
}

impl std::str::FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "*" => Ok(Endpoint::All),
            "-" => Ok(Endpoint::None),
            _ if s.starts_with('s') => s.parse().map(Endpoint::Server),
            _ => s.parse().map(Endpoint::Client),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub time: Instant,
    pub kind: EventKind,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub op: Option<OpId>,
    pub rt: Option<u8>,
    /// Rendered message, intent or value.
    pub payload: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub time: Instant,
    pub server: ServerId,
    pub state: ServerSnapshot,
}

/// Everything one execution produced. Feeding `schedule` back into [`run`]
/// with the same configuration and protocol reproduces it exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub config: SystemConfig,
    pub protocol: ProtocolKind,
    pub schedule: Schedule,
    pub events: Vec<Event>,
    /// Server state after every request it handled.
    pub snapshots: Vec<SnapshotRecord>,
    pub history: History,
    /// Acks each completed fast read decided on.
    pub evidence: BTreeMap<OpId, Vec<ReadAck>>,
}

enum Pending {
    Invoke(OpId),
    Request {
        op: OpId,
        rt: u8,
        server: ServerId,
        request: Request,
        reply_delay: u64,
    },
    Reply {
        op: OpId,
        rt: u8,
        server: ServerId,
        reply: Reply,
    },
    Crash(ServerId),
}

struct OpState {
    client: ClientId,
    kind: OpKind,
    value: Option<Value>,
    invoke: Option<Instant>,
    response: Option<Instant>,
    rounds: u32,
}

struct ClientSlot {
    automaton: Box<dyn ClientAutomaton>,
    busy: bool,
    backlog: VecDeque<OpId>,
}

struct Sim<'a> {
    schedule: &'a Schedule,
    queue: BTreeMap<(Instant, u64), Pending>,
    seq: u64,
    clients: BTreeMap<ClientId, ClientSlot>,
    servers: Vec<Box<dyn ServerAutomaton>>,
    crashed: Vec<bool>,
    ops: Vec<OpState>,
    events: Vec<Event>,
    snapshots: Vec<SnapshotRecord>,
    evidence: BTreeMap<OpId, Vec<ReadAck>>,
}

/// Executes `schedule` to quiescence. Events at equal instants run in the
/// order they were scheduled; crashes are scheduled first.
pub fn run(cfg: &SystemConfig, protocol: ProtocolKind, schedule: &Schedule) -> Result<ExecutionTrace> {
    cfg.validate()?;
    schedule.validate(cfg)?;
    let mut sim = Sim {
        schedule,
        queue: BTreeMap::new(),
        seq: 0,
        clients: cfg
            .client_ids()
            .map(|c| {
                (
                    c,
                    ClientSlot {
                        automaton: protocol.client(cfg, c),
                        busy: false,
                        backlog: VecDeque::new(),
                    },
                )
            })
            .collect(),
        servers: cfg.server_ids().map(|_| protocol.server()).collect(),
        crashed: vec![false; cfg.servers as usize],
        ops: schedule
            .workload
            .iter()
            .map(|w| OpState {
                client: w.client,
                kind: match w.intent {
                    Intent::Write => OpKind::Write,
                    Intent::Read => OpKind::Read,
                },
                value: None,
                invoke: None,
                response: None,
                rounds: 0,
            })
            .collect(),
        events: Vec::new(),
        snapshots: Vec::new(),
        evidence: BTreeMap::new(),
    };
    for c in &schedule.crashes {
        sim.push(c.at, Pending::Crash(c.server));
    }
    for (i, w) in schedule.workload.iter().enumerate() {
        sim.push(w.invoke_at, Pending::Invoke(OpId(i as u32)));
    }
    while let Some(((time, _), item)) = sim.queue.pop_first() {
        sim.step(time, item)?;
    }

    let history = History::new(
        sim.ops
            .iter()
            .enumerate()
            .filter_map(|(i, o)| {
                Some(OpRecord {
                    id: OpId(i as u32),
                    client: o.client,
                    kind: o.kind,
                    value: match o.kind {
                        OpKind::Write => o.value,
                        OpKind::Read => o.response.and(o.value),
                    },
                    invoke: o.invoke?,
                    response: o.response,
                    round_trips: o.rounds,
                })
            })
            .collect(),
    );
    Ok(ExecutionTrace {
        config: *cfg,
        protocol,
        schedule: schedule.clone(),
        events: sim.events,
        snapshots: sim.snapshots,
        history,
        evidence: sim.evidence,
    })
}

impl Sim<'_> {
    fn push(&mut self, at: Instant, item: Pending) {
        self.queue.insert((at, self.seq), item);
        self.seq += 1;
    }

    #[allow(clippy::too_many_arguments)]
    fn log(&mut self, time: Instant, kind: EventKind, src: Endpoint, dst: Endpoint, op: Option<OpId>, rt: Option<u8>, payload: String) {
        self.events.push(Event {
            time,
            kind,
            src,
            dst,
            op,
            rt,
            payload,
        });
    }

    fn step(&mut self, now: Instant, item: Pending) -> Result<()> {
        match item {
            Pending::Crash(s) => {
                self.crashed[s.0 as usize] = true;
                self.log(now, EventKind::Crash, Endpoint::Server(s), Endpoint::None, None, None, String::new());
            }
            Pending::Invoke(op) => {
                let client = self.ops[op.0 as usize].client;
                let slot = self.clients.get_mut(&client).expect("validated client");
                if slot.busy {
                    slot.backlog.push_back(op);
                    return Ok(());
                }
                slot.busy = true;
                let intent = match self.ops[op.0 as usize].kind {
                    OpKind::Write => Intent::Write,
                    OpKind::Read => Intent::Read,
                };
                let request = slot.automaton.invoke(op, intent)?;
                self.ops[op.0 as usize].invoke = Some(now);
                let name = self.ops[op.0 as usize].kind.to_string();
                self.log(now, EventKind::Invoke, Endpoint::Client(client), Endpoint::None, Some(op), None, name);
                self.broadcast(now, op, 0, request)?;
            }
            Pending::Request {
                op,
                rt,
                server,
                request,
                reply_delay,
            } => {
                let client = self.ops[op.0 as usize].client;
                let (src, dst) = (Endpoint::Client(client), Endpoint::Server(server));
                if self.crashed[server.0 as usize] {
                    self.log(now, EventKind::Drop, src, dst, Some(op), Some(rt), request.to_string());
                    return Ok(());
                }
                self.log(now, EventKind::Deliver, src, dst, Some(op), Some(rt), request.to_string());
                let automaton = &mut self.servers[server.0 as usize];
                let reply = automaton.handle(client, &request);
                let state = automaton.snapshot();
                self.snapshots.push(SnapshotRecord { time: now, server, state });
                self.push(now + reply_delay, Pending::Reply { op, rt, server, reply });
            }
            Pending::Reply { op, rt, server, reply } => {
                let client = self.ops[op.0 as usize].client;
                self.log(
                    now,
                    EventKind::Deliver,
                    Endpoint::Server(server),
                    Endpoint::Client(client),
                    Some(op),
                    Some(rt),
                    reply.to_string(),
                );
                let slot = self.clients.get_mut(&client).expect("validated client");
                match slot.automaton.deliver(op, rt, server, &reply)? {
                    ClientStep::Wait => {}
                    ClientStep::Broadcast(request) => self.broadcast(now, op, rt + 1, request)?,
                    ClientStep::Done(outcome) => {
                        slot.busy = false;
                        let next = slot.backlog.pop_front();
                        let state = &mut self.ops[op.0 as usize];
                        state.response = Some(now);
                        state.value = Some(outcome.value);
                        if !outcome.evidence.is_empty() {
                            self.evidence.insert(op, outcome.evidence);
                        }
                        self.log(
                            now,
                            EventKind::Respond,
                            Endpoint::Client(client),
                            Endpoint::None,
                            Some(op),
                            None,
                            outcome.value.to_string(),
                        );
                        if let Some(next) = next {
                            self.push(now + 1, Pending::Invoke(next));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn broadcast(&mut self, now: Instant, op: OpId, rt: u8, request: Request) -> Result<()> {
        let state = &mut self.ops[op.0 as usize];
        state.rounds += 1;
        if state.kind == OpKind::Write {
            if let Request::Update(v) = request {
                state.value = Some(v);
            }
        }
        let client = state.client;
        self.log(now, EventKind::Send, Endpoint::Client(client), Endpoint::All, Some(op), Some(rt), request.to_string());
        for s in 0..self.servers.len() as u32 {
            let server = ServerId(s);
            let delivery = self.schedule.delivery(op, rt, server).ok_or_else(|| {
                Error::InvalidSchedule(format!("no delivery planned for {op} rt{rt} {server}"))
            })?;
            match delivery {
                Delivery::Skip => self.log(
                    now,
                    EventKind::Skip,
                    Endpoint::Client(client),
                    Endpoint::Server(server),
                    Some(op),
                    Some(rt),
                    request.to_string(),
                ),
                Delivery::After { request: d, reply } => self.push(
                    now + d,
                    Pending::Request {
                        op,
                        rt,
                        server,
                        request: request.clone(),
                        reply_delay: reply,
                    },
                ),
            }
        }
        Ok(())
    }
}
