//! Deterministic discrete-event simulator.
//!
//! A [`Schedule`] fixes everything the adversary controls: when each
//! operation is invoked, how long every request and reply takes per
//! round-trip and server, which exchanges are skipped, and which servers
//! crash when. [`run`] replays it against a protocol and records the full
//! event log, server snapshots and the resulting history.

mod diagnostics;
mod engine;
mod random;
mod schedule;
pub mod tracefile;

pub use diagnostics::{
    append_only_violations, crucial_info, crucial_info_all, round_trip_counts, timestamp_gaps, RoundTripSummary,
    TimestampGap,
};
pub use engine::{run, Endpoint, Event, EventKind, ExecutionTrace, SnapshotRecord};
pub use random::{random_schedule, random_workload, RandomParams};
pub use schedule::{Crash, Delivery, Schedule, WorkItem};
