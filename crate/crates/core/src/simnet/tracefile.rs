//! Line-oriented trace container.
//!
//! ```text
//! quorumlab-trace v1
//! config servers=5 writers=2 readers=2 crash_tolerance=1 protocol=w2r1
//! event time=3 kind=deliver src=w0 dst=s1 op=0 rt=0 payload=query
//! op id=0 client=w0 kind=write value=1:w0 invoke=0 response=9 rt=2
//! end events=1 ops=1
//! ```
//!
//! `payload` always comes last and runs to the end of the line. `-` marks
//! an absent field. The `config` line and the events are optional, so a
//! bare history is a valid file. A file without the `end` trailer, or whose
//! counts disagree with it, is rejected as truncated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::automata::ProtocolKind;
use crate::error::{Error, Result};
use crate::histories::{History, OpKind, OpRecord};
use crate::ids::OpId;
use crate::register::{SystemConfig, Value};
use crate::simnet::engine::{Endpoint, Event, EventKind, ExecutionTrace};

pub const HEADER: &str = "quorumlab-trace v1";

/// Parsed contents of a trace container.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceFile {
    pub config: Option<(SystemConfig, ProtocolKind)>,
    pub events: Vec<Event>,
    pub history: History,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn write_config(out: &mut String, cfg: &SystemConfig, protocol: ProtocolKind) {
    writeln!(
        out,
        "config servers={} writers={} readers={} crash_tolerance={} protocol={protocol}",
        cfg.servers, cfg.writers, cfg.readers, cfg.crash_tolerance
    )
    .expect("writing to a String");
}

fn write_ops(out: &mut String, h: &History) {
    for o in &h.ops {
        writeln!(
            out,
            "op id={} client={} kind={} value={} invoke={} response={} rt={}",
            o.id.0,
            o.client,
            o.kind,
            opt(o.value),
            o.invoke,
            opt(o.response),
            o.round_trips
        )
        .expect("writing to a String");
    }
}

/// Renders a full trace: config, every event, then the history.
pub fn export_trace(trace: &ExecutionTrace) -> String {
    let mut out = format!("{HEADER}\n");
    write_config(&mut out, &trace.config, trace.protocol);
    for e in &trace.events {
        writeln!(
            out,
            "event time={} kind={} src={} dst={} op={} rt={} payload={}",
            e.time,
            e.kind.name(),
            e.src,
            e.dst,
            opt(e.op.map(|o| o.0)),
            opt(e.rt),
            e.payload
        )
        .expect("writing to a String");
    }
    write_ops(&mut out, &trace.history);
    writeln!(out, "end events={} ops={}", trace.events.len(), trace.history.len()).expect("writing to a String");
    out
}

/// Renders only the operation records, optionally tagged with a config.
pub fn export_history(h: &History, config: Option<(&SystemConfig, ProtocolKind)>) -> String {
    let mut out = format!("{HEADER}\n");
    if let Some((cfg, p)) = config {
        write_config(&mut out, cfg, p);
    }
    write_ops(&mut out, h);
    writeln!(out, "end events=0 ops={}", h.len()).expect("writing to a String");
    out
}

struct Fields<'a> {
    line: usize,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn parse(line: usize, text: &'a str) -> Result<Self> {
        let (head, payload) = match text.find(" payload=") {
            Some(i) => (&text[..i], Some(&text[i + " payload=".len()..])),
            None => (text, None),
        };
        let mut map = BTreeMap::new();
        for tok in head.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected key=value, found `{tok}`"),
            })?;
            map.insert(k, v);
        }
        if let Some(p) = payload {
            map.insert("payload", p);
        }
        Ok(Fields { line, map })
    }

    fn raw(&self, key: &str) -> Result<&'a str> {
        self.map.get(key).copied().ok_or_else(|| Error::Parse {
            line: self.line,
            message: format!("missing field `{key}`"),
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: ToString,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e: T::Err| Error::Parse {
            line: self.line,
            message: format!("bad `{key}` value `{raw}`: {}", e.to_string()),
        })
    }

    fn maybe<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: ToString,
    {
        if self.raw(key)? == "-" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }
}

/// Parses a trace or history file.
pub fn parse(text: &str) -> Result<TraceFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim_end() == HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{HEADER}`"),
            })
        }
    }
    let mut config = None;
    let mut events = Vec::new();
    let mut ops = Vec::new();
    let mut trailer = None;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if trailer.is_some() {
            return Err(Error::Parse {
                line: n,
                message: "content after the end trailer".into(),
            });
        }
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        let f = Fields::parse(n, rest)?;
        match tag {
            "config" => {
                let cfg = SystemConfig {
                    servers: f.get("servers")?,
                    writers: f.get("writers")?,
                    readers: f.get("readers")?,
                    crash_tolerance: f.get("crash_tolerance")?,
                };
                cfg.validate().map_err(|e| Error::Parse {
                    line: n,
                    message: e.to_string(),
                })?;
                config = Some((cfg, f.get::<ProtocolKind>("protocol")?));
            }
            "event" => {
                let kind = f.raw("kind")?;
                events.push(Event {
                    time: f.get("time")?,
                    kind: EventKind::parse(kind).ok_or_else(|| Error::Parse {
                        line: n,
                        message: format!("unknown event kind `{kind}`"),
                    })?,
                    src: f.get::<Endpoint>("src")?,
                    dst: f.get::<Endpoint>("dst")?,
                    op: f.maybe::<u32>("op")?.map(OpId),
                    rt: f.maybe("rt")?,
                    payload: f.raw("payload")?.to_string(),
                });
            }
            "op" => {
                let kind = match f.raw("kind")? {
                    "write" => OpKind::Write,
                    "read" => OpKind::Read,
                    other => {
                        return Err(Error::Parse {
                            line: n,
                            message: format!("unknown operation kind `{other}`"),
                        })
                    }
                };
                ops.push(OpRecord {
                    id: OpId(f.get("id")?),
                    client: f.get("client")?,
                    kind,
                    value: f.maybe::<Value>("value")?,
                    invoke: f.get("invoke")?,
                    response: f.maybe("response")?,
                    round_trips: f.get("rt")?,
                });
            }
            "end" => trailer = Some((n, f.get::<usize>("events")?, f.get::<usize>("ops")?)),
            other => {
                return Err(Error::Parse {
                    line: n,
                    message: format!("unknown record `{other}`"),
                })
            }
        }
    }
    let Some((n, ev, op)) = trailer else {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: "truncated file: missing end trailer".into(),
        });
    };
    if ev != events.len() || op != ops.len() {
        return Err(Error::Parse {
            line: n,
            message: format!(
                "trailer announces {ev} events and {op} ops, file has {} and {}",
                events.len(),
                ops.len()
            ),
        });
    }
    Ok(TraceFile {
        config,
        events,
        history: History::new(ops),
    })
}
