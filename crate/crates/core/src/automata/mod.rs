//! Protocol automata driven by the simulator.
//!
//! Every protocol is a family of client and server state machines. Clients
//! broadcast one request per round-trip to all servers and decide, reply by
//! reply, whether to wait, start the next round-trip, or respond. Servers
//! answer each request immediately.

mod clients;
mod server;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ClientId, OpId, ServerId};
use crate::register::{ReadAck, SystemConfig, Value, ValueVector};

pub use clients::{AbdReader, FastReader, NaiveWriter, TwoPhaseWriter};
pub use server::ServerState;

/// Upper bound on round-trips per operation across all protocols here.
pub const MAX_ROUNDS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intent {
    Write,
    Read,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Request {
    /// Pure query; never changes server state.
    Query,
    Update(Value),
    /// Fast read carrying the reader's value queue.
    Read(BTreeSet<Value>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reply {
    Vector(ValueVector),
    Latest(Value),
    Ack,
}

/// Result of a completed operation. `evidence` holds the acks a fast read
/// decided on and is empty otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub value: Value,
    pub evidence: Vec<ReadAck>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClientStep {
    Wait,
    Broadcast(Request),
    Done(Outcome),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServerSnapshot {
    Log { current: Value, vector: ValueVector },
    Register(Value),
}

pub trait ClientAutomaton: Send {
    /// Starts `op` and returns the first round-trip's request.
    fn invoke(&mut self, op: OpId, intent: Intent) -> Result<Request>;

    /// Handles one reply. Replies for any other operation or round-trip
    /// than the one in progress are ignored.
    fn deliver(&mut self, op: OpId, rt: u8, server: ServerId, reply: &Reply) -> Result<ClientStep>;
}

pub trait ServerAutomaton: Send {
    fn handle(&mut self, from: ClientId, request: &Request) -> Reply;
    fn snapshot(&self) -> ServerSnapshot;
}

/// The protocol families selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    /// Two-round writes, one-round reads with the admissibility test.
    #[serde(rename = "w2r1")]
    W2r1,
    /// Query + update writes, query + write-back reads.
    #[serde(rename = "w2r2-abd")]
    W2r2Abd,
    /// One-round writes with a writer-local counter; ABD-style reads.
    #[serde(rename = "w1r2-naive")]
    W1r2Naive,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [
        ProtocolKind::W2r1,
        ProtocolKind::W2r2Abd,
        ProtocolKind::W1r2Naive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::W2r1 => "w2r1",
            ProtocolKind::W2r2Abd => "w2r2-abd",
            ProtocolKind::W1r2Naive => "w1r2-naive",
        }
    }

    pub fn write_rounds(self) -> u8 {
        match self {
            ProtocolKind::W1r2Naive => 1,
            _ => 2,
        }
    }

    pub fn read_rounds(self) -> u8 {
        match self {
            ProtocolKind::W2r1 => 1,
            _ => 2,
        }
    }

    pub fn client(self, cfg: &SystemConfig, id: ClientId) -> Box<dyn ClientAutomaton> {
        match (self, id) {
            (ProtocolKind::W1r2Naive, ClientId::Writer(w)) => Box::new(NaiveWriter::new(w, cfg)),
            (_, ClientId::Writer(w)) => Box::new(TwoPhaseWriter::new(w, cfg)),
            (ProtocolKind::W2r1, ClientId::Reader(r)) => Box::new(FastReader::new(r, cfg)),
            (_, ClientId::Reader(r)) => Box::new(AbdReader::new(r, cfg)),
        }
    }

    pub fn server(self) -> Box<dyn ServerAutomaton> {
        match self {
            ProtocolKind::W2r1 => Box::new(FastServer(ServerState::new())),
            ProtocolKind::W2r2Abd => Box::new(AbdServer(ServerState::new())),
            ProtocolKind::W1r2Naive => Box::new(LastArrivalServer(Value::INITIAL)),
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownProtocol(s.to_string()))
    }
}

/// Fast-read server: full vector on queries and reads.
struct FastServer(ServerState);

impl ServerAutomaton for FastServer {
    fn handle(&mut self, from: ClientId, request: &Request) -> Reply {
        match request {
            Request::Query => Reply::Vector(self.0.vector().clone()),
            Request::Update(v) => {
                self.0.on_write(*v, from);
                Reply::Ack
            }
            Request::Read(queue) => Reply::Vector(self.0.on_read(queue, from)),
        }
    }

    fn snapshot(&self) -> ServerSnapshot {
        ServerSnapshot::Log {
            current: self.0.current(),
            vector: self.0.vector().clone(),
        }
    }
}

/// ABD server: answers with its current maximum only.
struct AbdServer(ServerState);

impl ServerAutomaton for AbdServer {
    fn handle(&mut self, from: ClientId, request: &Request) -> Reply {
        match request {
            Request::Query | Request::Read(_) => Reply::Latest(self.0.current()),
            Request::Update(v) => {
                self.0.update(*v, from);
                Reply::Ack
            }
        }
    }

    fn snapshot(&self) -> ServerSnapshot {
        ServerSnapshot::Log {
            current: self.0.current(),
            vector: self.0.vector().clone(),
        }
    }
}

/// Strawman server: whatever update arrives last wins, regardless of order.
struct LastArrivalServer(Value);

impl ServerAutomaton for LastArrivalServer {
    fn handle(&mut self, _from: ClientId, request: &Request) -> Reply {
        match request {
            Request::Query | Request::Read(_) => Reply::Latest(self.0),
            Request::Update(v) => {
                self.0 = *v;
                Reply::Ack
            }
        }
    }

    fn snapshot(&self) -> ServerSnapshot {
        ServerSnapshot::Register(self.0)
    }
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Request::Query => f.write_str("query"),
            Request::Update(v) => write!(f, "update({v})"),
            Request::Read(q) => {
                f.write_str("read[")?;
                for (i, v) in q.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl fmt::Display for Reply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reply::Vector(v) => write!(f, "vector{v}"),
            Reply::Latest(v) => write!(f, "latest({v})"),
            Reply::Ack => f.write_str("ack"),
        }
    }
}

impl fmt::Display for ServerSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServerSnapshot::Log { current, vector } => write!(f, "current={current} log={vector}"),
            ServerSnapshot::Register(v) => write!(f, "register={v}"),
        }
    }
}
