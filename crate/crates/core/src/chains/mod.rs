//! Chain executions from the impossibility argument for fast writes, and a
//! search that evaluates a concrete protocol across them.
//!
//! All chain schedules share one workload: writes `W1` (by `w0`) and `W2`
//! (by `w1`) that overlap in time, then read `R1` (by `r0`), and in β chains
//! a second read `R2` (by `r1`) whose round-trips interleave with `R1`'s.

mod build;
mod search;

pub use build::{
    build_chain_alpha, build_chain_beta, find_critical_server, return_label, BetaVariant, CriticalServerReport,
    ReturnLabel, R1, R2, W1, W2,
};
pub use search::{
    contradiction_search, indistinguishability_classes, ChainSummary, Finding, FoundViolation, Origin,
    SearchReport, SEARCH_MAX_GAP, SEARCH_OPS,
};
