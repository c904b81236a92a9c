//! Process and operation identifiers.
//!
//! Writers, readers and servers live in disjoint, dense, zero-based ranges.
//! The textual forms `w3`, `r0`, `s4` are used throughout traces and reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ServerId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpId(pub u32);

/// A client process. Writers order before readers so that `updated` sets
/// print writer-first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClientId {
    Writer(u32),
    Reader(u32),
}

impl ClientId {
    pub fn is_writer(self) -> bool {
        matches!(self, ClientId::Writer(_))
    }

    pub fn is_reader(self) -> bool {
        matches!(self, ClientId::Reader(_))
    }
}

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "op{}", self.0)
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientId::Writer(i) => write!(f, "w{i}"),
            ClientId::Reader(i) => write!(f, "r{i}"),
        }
    }
}

fn parse_index(s: &str, prefix: char) -> Option<u32> {
    s.strip_prefix(prefix)?.parse().ok()
}

impl FromStr for ClientId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(i) = parse_index(s, 'w') {
            Ok(ClientId::Writer(i))
        } else if let Some(i) = parse_index(s, 'r') {
            Ok(ClientId::Reader(i))
        } else {
            Err(format!("bad client id `{s}`"))
        }
    }
}

impl FromStr for ServerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_index(s, 's')
            .map(ServerId)
            .ok_or_else(|| format!("bad server id `{s}`"))
    }
}
