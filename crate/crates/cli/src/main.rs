use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use quorumlab::automata::ProtocolKind;
use quorumlab::experiment::{cmd_check, cmd_explore, cmd_matrix, cmd_run, ExperimentConfig, ScheduleMode, Status};
use quorumlab::register::SystemConfig;
use quorumlab::simnet::tracefile;
use quorumlab::Error;

#[derive(Parser)]
#[command(name = "quorumlab", version, about = "Simulate and check multi-writer quorum registers")]
struct Cli {
    /// Output format for stdout reports.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's protocol.
        #[arg(long)]
        protocol: Option<String>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check a trace or history file for atomicity and MWA0-MWA4.
    Check {
        file: PathBuf,
        /// Directory for the machine report; defaults to the input's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Search for an execution refuting a one-round-write protocol.
    Explore {
        #[arg(long)]
        protocol: String,
        #[arg(long)]
        servers: u32,
        #[arg(long)]
        crash_tolerance: u32,
        #[arg(long, default_value_t = 2)]
        writers: u32,
        #[arg(long, default_value_t = 2)]
        readers: u32,
        /// Random seeds to try after the constructed chains.
        #[arg(long, default_value_t = 1000)]
        budget: u64,
        /// Where to write the report and the traces behind a finding.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the feasibility table over ranges such as `3..12` or `5`.
    Matrix {
        #[arg(long, value_parser = parse_range)]
        servers: RangeInclusive<u32>,
        #[arg(long, value_parser = parse_range)]
        crash_tolerance: RangeInclusive<u32>,
        #[arg(long, value_parser = parse_range)]
        readers: RangeInclusive<u32>,
        #[arg(long, default_value_t = 2)]
        writers: u32,
    },
}

fn parse_range(s: &str) -> Result<RangeInclusive<u32>, String> {
    let num = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("`{t}`: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty range {a}..{b}"));
            }
            Ok(a..=b)
        }
        None => num(s).map(|n| n..=n),
    }
}

struct Failure(Status, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(Status::Usage, e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure(Status::Usage, format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn emit(format: Format, text: String, machine: String) {
    match format {
        Format::Text => print!("{text}"),
        Format::Machine => print!("{machine}"),
    }
}

fn run(cli: Cli) -> Result<Status, Failure> {
    let format = cli.format;
    match cli.command {
        Command::Run {
            config,
            seed,
            protocol,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::from_toml(&read(&config)?)?;
            if let Some(s) = seed {
                cfg.seed = Some(s);
            }
            if let Some(p) = protocol {
                cfg.protocol = p.parse()?;
            }
            cfg.validate()?;
            let base = config.parent().unwrap_or(Path::new("."));
            let schedule_text = match (&cfg.schedule_mode, &cfg.schedule_file) {
                (ScheduleMode::File, Some(f)) => Some(read(&base.join(f))?),
                _ => None,
            };
            let out = out_dir.unwrap_or_else(|| base.join(&cfg.out_dir));
            let art = cmd_run(&cfg, schedule_text.as_deref())?;
            fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            write(&out.join("config.toml"), &cfg.to_toml())?;
            write(&out.join("trace.txt"), &art.trace_text)?;
            write(&out.join("history.txt"), &art.history_text)?;
            write(&out.join("schedule.json"), &art.schedule_json)?;
            let text = art.summary.to_text();
            let machine = json(&art.summary);
            write(&out.join("summary.txt"), &text)?;
            write(&out.join("summary.json"), &machine)?;
            emit(format, text, machine);
            Ok(Status::Clean)
        }
        Command::Check { file, out_dir } => {
            let rep = cmd_check(&read(&file)?)?;
            let machine = json(&rep);
            let name = format!(
                "{}.report.json",
                file.file_name().map_or("history".into(), |n| n.to_string_lossy())
            );
            let dir = out_dir.unwrap_or_else(|| file.parent().unwrap_or(Path::new(".")).to_path_buf());
            write(&dir.join(name), &machine)?;
            emit(format, rep.to_text(), machine);
            Ok(rep.status)
        }
        Command::Explore {
            protocol,
            servers,
            crash_tolerance,
            writers,
            readers,
            budget,
            out_dir,
        } => {
            let protocol: ProtocolKind = protocol.parse()?;
            let system = SystemConfig::new(servers, writers, readers, crash_tolerance)?;
            let mut rep = cmd_explore(&system, protocol, budget)?;
            if let Some(out) = out_dir {
                fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
                for (i, t) in rep.traces.iter().enumerate() {
                    let path = out.join(format!("finding-{i}.trace"));
                    write(&path, &tracefile::export_trace(t))?;
                    rep.trace_files.push(path.display().to_string());
                }
                write(&out.join("explore.txt"), &rep.to_text())?;
                write(&out.join("explore.json"), &json(&rep))?;
            }
            emit(format, rep.to_text(), json(&rep));
            Ok(rep.status)
        }
        Command::Matrix {
            servers,
            crash_tolerance,
            readers,
            writers,
        } => {
            let rep = cmd_matrix(servers, crash_tolerance, readers, writers)?;
            emit(format, rep.to_text(), json(&rep));
            Ok(Status::Clean)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(Failure(status, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(status.code() as u8)
        }
    }
}
