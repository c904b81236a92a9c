use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_quorumlab");

fn quorumlab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, protocol: &str, seed: u64) -> String {
    let path = dir.join("exp.toml");
    fs::write(
        &path,
        format!(
            "version = 1\nprotocol = \"{protocol}\"\nservers = 5\nwriters = 2\nreaders = 2\n\
             crash_tolerance = 1\nschedule_mode = \"random\"\nseed = {seed}\n"
        ),
    )
    .unwrap();
    path.display().to_string()
}

const HEADER: &str = "quorumlab-trace v1\n";

#[test]
fn run_writes_artifacts_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "w2r1", 7);
    let out = dir.path().join("out");
    let o = quorumlab(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("writes: 3x2rt"), "{stdout}");
    assert!(stdout.contains("reads: 7x1rt"), "{stdout}");
    for f in ["trace.txt", "history.txt", "schedule.json", "summary.txt", "summary.json", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn run_is_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "w2r2-abd", 11);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(code(&quorumlab(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap()])), 0);
    }
    for f in ["trace.txt", "history.txt", "schedule.json", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn run_replays_a_saved_schedule() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "w2r1", 3);
    let first = dir.path().join("first");
    assert_eq!(code(&quorumlab(&["run", "--config", &cfg, "--out-dir", first.to_str().unwrap()])), 0);
    let replay = dir.path().join("replay.toml");
    fs::copy(first.join("schedule.json"), dir.path().join("s.json")).unwrap();
    fs::write(
        &replay,
        "version = 1\nprotocol = \"w2r1\"\nservers = 5\nwriters = 2\nreaders = 2\ncrash_tolerance = 1\n\
         schedule_mode = \"file\"\nschedule_file = \"s.json\"\nout_dir = \"second\"\n",
    )
    .unwrap();
    assert_eq!(code(&quorumlab(&["run", "--config", replay.to_str().unwrap()])), 0);
    assert_eq!(
        fs::read(first.join("trace.txt")).unwrap(),
        fs::read(dir.path().join("second/trace.txt")).unwrap()
    );
}

#[test]
fn run_rejects_bad_configs_with_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "w2r1", 7);
    let o = quorumlab(&["run", "--config", &cfg, "--protocol", "paxos"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown protocol"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, fs::read_to_string(&cfg).unwrap().replace("seed = 7\n", "")).unwrap();
    assert_eq!(code(&quorumlab(&["run", "--config", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&quorumlab(&["run", "--config", "/nonexistent.toml"])), 2);
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = dir.path().join("ok.txt");
    fs::write(
        &ok,
        format!(
            "{HEADER}op id=0 client=w0 kind=write value=1:w0 invoke=0 response=2 rt=2\n\
             op id=1 client=r0 kind=read value=1:w0 invoke=3 response=4 rt=1\nend events=0 ops=2\n"
        ),
    )
    .unwrap();
    assert_eq!(code(&quorumlab(&["check", ok.to_str().unwrap()])), 0);
    assert!(dir.path().join("ok.txt.report.json").exists());

    let bad = dir.path().join("bad.txt");
    fs::write(
        &bad,
        format!(
            "{HEADER}op id=0 client=w0 kind=write value=1:w0 invoke=0 response=2 rt=2\n\
             op id=1 client=w1 kind=write value=2:w1 invoke=3 response=4 rt=2\n\
             op id=2 client=r0 kind=read value=1:w0 invoke=5 response=6 rt=1\nend events=0 ops=3\n"
        ),
    )
    .unwrap();
    let o = quorumlab(&["check", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("MWA2: 1 violation(s)"), "{text}");
    assert!(text.contains("atomicity: violation"), "{text}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bad.txt.report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "Violation");

    let cut = dir.path().join("cut.txt");
    fs::write(&cut, format!("{HEADER}op id=0 client=w0 kind=write value=1:w0 invoke=0 response=2 rt=2\n")).unwrap();
    assert_eq!(code(&quorumlab(&["check", cut.to_str().unwrap()])), 2);
}

#[test]
fn explore_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ex");
    let o = quorumlab(&[
        "explore", "--protocol", "w1r2-naive", "--servers", "3", "--crash-tolerance", "1", "--budget", "0",
        "--out-dir", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    let trace = fs::read_to_string(out.join("finding-0.trace")).unwrap();
    let recheck = quorumlab(&["check", out.join("finding-0.trace").to_str().unwrap()]);
    assert!(trace.starts_with(HEADER));
    assert_eq!(code(&recheck), 1);

    let o = quorumlab(&["explore", "--protocol", "w2r1", "--servers", "5", "--crash-tolerance", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a fast-write candidate"));
}

#[test]
fn machine_format_is_json() {
    let o = quorumlab(&["--format", "machine", "matrix", "--servers", "5", "--crash-tolerance", "1", "--readers", "1..4"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let w2r1: Vec<_> = v["rows"].as_array().unwrap().iter().map(|r| r["w2r1"].as_str().unwrap().to_string()).collect();
    assert_eq!(w2r1, ["Possible", "Possible", "Impossible", "Impossible"]);
}

#[test]
fn matrix_rejects_empty_range() {
    assert_eq!(code(&quorumlab(&["matrix", "--servers", "6..5", "--crash-tolerance", "1", "--readers", "1"])), 2);
}
