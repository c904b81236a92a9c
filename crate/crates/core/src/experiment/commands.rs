use std::fmt::Write as _;
use std::ops::RangeInclusive;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::automata::ProtocolKind;
use crate::chains::{contradiction_search, ChainSummary, Finding, SearchReport};
use crate::error::{Error, Result};
use crate::experiment::config::ExperimentConfig;
use crate::histories::{check_atomic, check_mwa, AtomicityVerdict, MwaProperty, MwaReport};
use crate::register::{feasible_w2r1, feasible_w2r2, SystemConfig};
use crate::simnet::{run, tracefile, ExecutionTrace, RoundTripSummary};

/// Process exit status shared by every command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Clean = 0,
    Violation = 1,
    Usage = 2,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn round_trip_text(out: &mut String, rt: &RoundTripSummary) {
    for (name, hist) in [("writes", &rt.writes), ("reads", &rt.reads)] {
        let parts: Vec<String> = hist.iter().map(|(k, n)| format!("{n}x{k}rt")).collect();
        let joined = if parts.is_empty() { "none".to_string() } else { parts.join(" ") };
        writeln!(out, "{name}: {joined}").expect("writing to a String");
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub protocol: ProtocolKind,
    pub config: SystemConfig,
    pub seed: Option<u64>,
    pub invoked: usize,
    pub completed: usize,
    pub round_trips: RoundTripSummary,
    pub atomic: bool,
    pub mwa_violations: usize,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        writeln!(out, "config sha256: {}", self.config_hash).unwrap();
        writeln!(
            out,
            "protocol {} with S={} W={} R={} t={}",
            self.protocol, c.servers, c.writers, c.readers, c.crash_tolerance
        )
        .unwrap();
        if let Some(seed) = self.seed {
            writeln!(out, "seed: {seed}").unwrap();
        }
        writeln!(out, "operations: {} invoked, {} completed", self.invoked, self.completed).unwrap();
        round_trip_text(&mut out, &self.round_trips);
        writeln!(out, "atomic: {}", if self.atomic { "yes" } else { "no" }).unwrap();
        writeln!(out, "MWA violations: {}", self.mwa_violations).unwrap();
        out
    }
}

/// Files produced by one `run`.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub trace: ExecutionTrace,
    pub trace_text: String,
    pub history_text: String,
    pub schedule_json: String,
    pub summary: RunSummary,
}

/// Executes one simulation. `schedule_file` carries the schedule file's
/// contents in file mode.
pub fn cmd_run(cfg: &ExperimentConfig, schedule_file: Option<&str>) -> Result<RunArtifacts> {
    let system = cfg.system()?;
    let schedule = cfg.schedule(schedule_file)?;
    let trace = run(&system, cfg.protocol, &schedule)?;
    let verdict = check_atomic(&trace.history)?;
    let summary = RunSummary {
        config_hash: cfg.hash(),
        protocol: cfg.protocol,
        config: system,
        seed: cfg.seed,
        invoked: trace.history.len(),
        completed: trace.history.completed().count(),
        round_trips: RoundTripSummary::of(&trace),
        atomic: verdict.is_atomic(),
        mwa_violations: check_mwa(&trace.history).violations.len(),
    };
    Ok(RunArtifacts {
        trace_text: tracefile::export_trace(&trace),
        history_text: tracefile::export_history(&trace.history, Some((&system, cfg.protocol))),
        schedule_json: serde_json::to_string_pretty(&schedule).expect("schedules serialize"),
        summary,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub input_hash: String,
    pub operations: usize,
    pub completed: usize,
    pub verdict: AtomicityVerdict,
    pub mwa: MwaReport,
    pub status: Status,
}

impl CheckReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "input sha256: {}", self.input_hash).unwrap();
        writeln!(out, "operations: {} ({} completed)", self.operations, self.completed).unwrap();
        writeln!(out, "atomicity: {}", self.verdict).unwrap();
        for p in MwaProperty::ALL {
            match self.mwa.count(p) {
                0 => writeln!(out, "{p}: ok").unwrap(),
                n => writeln!(out, "{p}: {n} violation(s)").unwrap(),
            }
        }
        for v in &self.mwa.violations {
            writeln!(out, "  {v}").unwrap();
        }
        writeln!(out, "status: {}", if self.status == Status::Clean { "clean" } else { "violation" }).unwrap();
        out
    }
}

/// Checks a trace or history file for atomicity and MWA0–MWA4.
pub fn cmd_check(text: &str) -> Result<CheckReport> {
    let file = tracefile::parse(text)?;
    let h = &file.history;
    let verdict = check_atomic(h)?;
    let mwa = check_mwa(h);
    let status = if verdict.is_atomic() && mwa.is_clean() {
        Status::Clean
    } else {
        Status::Violation
    };
    Ok(CheckReport {
        input_hash: sha256_hex(text.as_bytes()),
        operations: h.len(),
        completed: h.completed().count(),
        verdict,
        mwa,
        status,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExploreReport {
    pub request_hash: String,
    pub protocol: ProtocolKind,
    pub config: SystemConfig,
    pub budget: u64,
    pub chains: Vec<ChainSummary>,
    pub critical_index: Option<u32>,
    pub seeds_examined: u64,
    pub finding: Option<Finding>,
    /// Trace files written for the finding's executions, when saved.
    pub trace_files: Vec<String>,
    pub status: Status,
    #[serde(skip)]
    pub traces: Vec<ExecutionTrace>,
}

impl ExploreReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        writeln!(out, "request sha256: {}", self.request_hash).unwrap();
        writeln!(
            out,
            "protocol {} with S={} W={} R={} t={}, seed budget {}",
            self.protocol, c.servers, c.writers, c.readers, c.crash_tolerance, self.budget
        )
        .unwrap();
        for chain in &self.chains {
            let returns: Vec<String> = chain
                .returns
                .iter()
                .map(|r| r.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("/"))
                .collect();
            writeln!(out, "{}: returns [{}] classes {:?}", chain.name, returns.join(" "), chain.classes).unwrap();
            if chain.name == "alpha" {
                let crucial: Vec<String> = chain.crucial.iter().map(|c| c.join(",")).collect();
                writeln!(out, "alpha crucial info: [{}]", crucial.join("] [")).unwrap();
            }
        }
        match self.critical_index {
            Some(i) => writeln!(out, "critical index: {i} (server s{})", i - 1).unwrap(),
            None => writeln!(out, "critical index: none (chain ends agree)").unwrap(),
        }
        writeln!(out, "random seeds examined: {}", self.seeds_examined).unwrap();
        match &self.finding {
            None => writeln!(out, "outcome: exhausted").unwrap(),
            Some(Finding::NotAtomic { origin, certificate }) => {
                writeln!(out, "outcome: violation in {origin}").unwrap();
                writeln!(out, "certificate: {certificate}").unwrap();
            }
            Some(Finding::Indistinguishable {
                first,
                second,
                observer,
                returns,
            }) => {
                writeln!(
                    out,
                    "outcome: {observer} cannot tell {first} from {second} yet returned {} and {}",
                    returns.0, returns.1
                )
                .unwrap();
            }
        }
        for f in &self.trace_files {
            writeln!(out, "trace: {f}").unwrap();
        }
        out
    }
}

/// Runs the contradiction search; a finding means status `Violation`.
pub fn cmd_explore(system: &SystemConfig, protocol: ProtocolKind, budget: u64) -> Result<ExploreReport> {
    let request = serde_json::json!({
        "protocol": protocol,
        "config": system,
        "budget": budget,
    });
    let SearchReport {
        chains,
        critical,
        seeds_examined,
        found,
        ..
    } = contradiction_search(system, protocol, budget)?;
    let (finding, traces) = match found {
        Some(f) => (Some(f.finding), f.traces),
        None => (None, Vec::new()),
    };
    Ok(ExploreReport {
        request_hash: sha256_hex(request.to_string().as_bytes()),
        protocol,
        config: *system,
        budget,
        chains,
        critical_index: critical,
        seeds_examined,
        status: if finding.is_some() { Status::Violation } else { Status::Clean },
        finding,
        trace_files: Vec::new(),
        traces,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Feasibility {
    Possible,
    Impossible,
    /// The impossibility result does not cover this population.
    Open,
    /// Single-writer populations are outside this tool's model.
    OutOfScope,
}

impl Feasibility {
    fn from_bool(b: bool) -> Self {
        if b {
            Feasibility::Possible
        } else {
            Feasibility::Impossible
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Feasibility::Possible => "yes",
            Feasibility::Impossible => "no",
            Feasibility::Open => "n/a",
            Feasibility::OutOfScope => "scope",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixRow {
    pub servers: u32,
    pub crash_tolerance: u32,
    pub readers: u32,
    pub writers: u32,
    pub w2r2: Feasibility,
    pub w1r2: Feasibility,
    pub w2r1: Feasibility,
    pub w1r1: Feasibility,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixReport {
    pub request_hash: String,
    pub rows: Vec<MatrixRow>,
    pub notes: Vec<String>,
}

impl MatrixReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "request sha256: {}", self.request_hash).unwrap();
        writeln!(out, "{:>3} {:>2} {:>2} {:>2}  {:>5} {:>5} {:>5} {:>5}", "S", "t", "R", "W", "W2R2", "W1R2", "W2R1", "W1R1")
            .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{:>3} {:>2} {:>2} {:>2}  {:>5} {:>5} {:>5} {:>5}",
                r.servers,
                r.crash_tolerance,
                r.readers,
                r.writers,
                r.w2r2.label(),
                r.w1r2.label(),
                r.w2r1.label(),
                r.w1r1.label()
            )
            .unwrap();
        }
        for n in &self.notes {
            writeln!(out, "note: {n}").unwrap();
        }
        out
    }
}

/// Feasibility of each round-trip class over the given populations.
/// Combinations with `t ≥ S` are skipped.
pub fn cmd_matrix(
    servers: RangeInclusive<u32>,
    crash_tolerance: RangeInclusive<u32>,
    readers: RangeInclusive<u32>,
    writers: u32,
) -> Result<MatrixReport> {
    if servers.is_empty() || crash_tolerance.is_empty() || readers.is_empty() {
        return Err(Error::InvalidExperiment("matrix ranges must be non-empty".into()));
    }
    if writers == 0 || *crash_tolerance.start() == 0 || *readers.start() == 0 {
        return Err(Error::InvalidExperiment("writers, readers and t must be at least 1".into()));
    }
    let request = serde_json::json!({
        "servers": [servers.start(), servers.end()],
        "crash_tolerance": [crash_tolerance.start(), crash_tolerance.end()],
        "readers": [readers.start(), readers.end()],
        "writers": writers,
    });
    let mut rows = Vec::new();
    for s in servers {
        for t in crash_tolerance.clone() {
            if t >= s {
                continue;
            }
            for r in readers.clone() {
                let cfg = SystemConfig::new(s, writers, r, t)?;
                let multi = writers >= 2;
                let covered = multi && r >= 2;
                let scoped = |f: Feasibility| if multi { f } else { Feasibility::OutOfScope };
                let lower_bound = if covered { Feasibility::Impossible } else { Feasibility::Open };
                rows.push(MatrixRow {
                    servers: s,
                    crash_tolerance: t,
                    readers: r,
                    writers,
                    w2r2: scoped(Feasibility::from_bool(feasible_w2r2(&cfg))),
                    w1r2: scoped(lower_bound),
                    w2r1: scoped(Feasibility::from_bool(feasible_w2r1(&cfg))),
                    w1r1: scoped(lower_bound),
                });
            }
        }
    }
    let mut notes = Vec::new();
    if writers < 2 {
        notes.push("single-writer regime (W = 1) is out of this tool's scope; all cells marked `scope`".into());
    }
    Ok(MatrixReport {
        request_hash: sha256_hex(request.to_string().as_bytes()),
        rows,
        notes,
    })
}

/// Maps an error to the exit status the CLI reports for it.
pub fn error_status(_e: &Error) -> Status {
    Status::Usage
}
