//! Browser bindings. Each export takes plain numbers and strings and returns
//! a JSON document; `www/index.html` renders them.

use quorumlab::automata::ProtocolKind;
use quorumlab::chains::{build_chain_alpha, return_label, R1};
use quorumlab::experiment::{cmd_check, cmd_matrix, cmd_run, ExperimentConfig};
use quorumlab::register::SystemConfig;
use quorumlab::simnet::{crucial_info_all, run};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn system(servers: u32, readers: u32, crash_tolerance: u32) -> Result<SystemConfig, String> {
    SystemConfig::new(servers, 2, readers, crash_tolerance).map_err(|e| e.to_string())
}

fn protocol(name: &str) -> Result<ProtocolKind, String> {
    name.parse().map_err(|e: quorumlab::Error| e.to_string())
}

/// Feasibility table for `S ∈ [3, max_servers]`, `t ∈ [1, max_t]`, `R ∈ [1, max_readers]`.
pub fn matrix_json(max_servers: u32, max_t: u32, max_readers: u32) -> Result<Value, String> {
    let rep = cmd_matrix(3..=max_servers, 1..=max_t, 1..=max_readers, 2).map_err(|e| e.to_string())?;
    serde_json::to_value(rep).map_err(|e| e.to_string())
}

/// Runs every element of chain α and reports crucial info and returns.
pub fn chain_json(protocol_name: &str, servers: u32, crash_tolerance: u32) -> Result<Value, String> {
    let p = protocol(protocol_name)?;
    let cfg = system(servers, 2, crash_tolerance)?;
    let chain = build_chain_alpha(&cfg).map_err(|e| e.to_string())?;
    let mut elements = Vec::new();
    let mut previous = None;
    let mut critical = None;
    for (i, schedule) in chain.iter().enumerate() {
        let trace = run(&cfg, p, schedule).map_err(|e| e.to_string())?;
        let ret = return_label(&trace, R1);
        if critical.is_none() && previous.is_some_and(|prev| prev != ret) {
            critical = Some(i);
        }
        previous = Some(ret);
        elements.push(json!({
            "index": i,
            "crucial": crucial_info_all(&trace).map_err(|e| e.to_string())?,
            "returns": ret.to_string(),
        }));
    }
    Ok(json!({ "protocol": p, "elements": elements, "critical": critical }))
}

/// One seeded random run followed by the atomicity and MWA checks.
pub fn simulate_json(protocol_name: &str, servers: u32, readers: u32, crash_tolerance: u32, seed: u64) -> Result<Value, String> {
    let cfg = ExperimentConfig::random(protocol(protocol_name)?, system(servers, readers, crash_tolerance)?, seed);
    let art = cmd_run(&cfg, None).map_err(|e| e.to_string())?;
    let check = cmd_check(&art.history_text).map_err(|e| e.to_string())?;
    Ok(json!({
        "summary": art.summary,
        "check": check.to_text(),
        "history": art.history_text,
    }))
}

fn finish(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn feasibility_matrix(max_servers: u32, max_t: u32, max_readers: u32) -> Result<String, JsError> {
    finish(matrix_json(max_servers, max_t, max_readers))
}

#[wasm_bindgen]
pub fn explore_chain(protocol: &str, servers: u32, crash_tolerance: u32) -> Result<String, JsError> {
    finish(chain_json(protocol, servers, crash_tolerance))
}

#[wasm_bindgen]
pub fn simulate(protocol: &str, servers: u32, readers: u32, crash_tolerance: u32, seed: u32) -> Result<String, JsError> {
    finish(simulate_json(protocol, servers, readers, crash_tolerance, u64::from(seed)))
}
