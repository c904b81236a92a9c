use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::automata::ProtocolKind;
use crate::chains::build_chain_alpha;
use crate::error::{Error, Result};
use crate::register::SystemConfig;
use crate::simnet::{random_schedule, random_workload, RandomParams, Schedule};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// Seeded random workload and adversary.
    Random,
    /// A schedule previously written by `run` (JSON).
    File,
    /// One element of chain α.
    Chain,
}

impl FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ScheduleMode::Random),
            "file" => Ok(ScheduleMode::File),
            "chain" => Ok(ScheduleMode::Chain),
            _ => Err(Error::InvalidExperiment(format!("unknown schedule mode `{s}`"))),
        }
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleMode::Random => "random",
            ScheduleMode::File => "file",
            ScheduleMode::Chain => "chain",
        })
    }
}

fn default_ops() -> usize {
    10
}
fn default_max_gap() -> u64 {
    6
}
fn default_max_delay() -> u64 {
    20
}
fn default_skip() -> u32 {
    150
}
fn default_crash() -> u32 {
    500
}
fn default_horizon() -> u64 {
    200
}
fn default_out_dir() -> String {
    "out".into()
}

/// Flat key-value experiment description, stored as TOML.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub protocol: ProtocolKind,
    pub servers: u32,
    pub writers: u32,
    pub readers: u32,
    pub crash_tolerance: u32,
    pub schedule_mode: ScheduleMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_ops")]
    pub ops: usize,
    #[serde(default = "default_max_gap")]
    pub max_gap: u64,
    #[serde(default = "default_max_delay")]
    pub max_delay: u64,
    #[serde(default = "default_skip")]
    pub skip_per_mille: u32,
    #[serde(default = "default_crash")]
    pub crash_per_mille: u32,
    /// Defaults to the crash tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_crashes: Option<u32>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_index: Option<u32>,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

impl ExperimentConfig {
    /// A random-mode experiment with default adversary parameters.
    pub fn random(protocol: ProtocolKind, system: SystemConfig, seed: u64) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            protocol,
            servers: system.servers,
            writers: system.writers,
            readers: system.readers,
            crash_tolerance: system.crash_tolerance,
            schedule_mode: ScheduleMode::Random,
            seed: Some(seed),
            ops: default_ops(),
            max_gap: default_max_gap(),
            max_delay: default_max_delay(),
            skip_per_mille: default_skip(),
            crash_per_mille: default_crash(),
            max_crashes: None,
            horizon: default_horizon(),
            schedule_file: None,
            chain_index: None,
            out_dir: default_out_dir(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::InvalidExperiment(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs always serialize")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn system(&self) -> Result<SystemConfig> {
        SystemConfig::new(self.servers, self.writers, self.readers, self.crash_tolerance)
    }

    pub fn random_params(&self) -> RandomParams {
        RandomParams {
            max_delay: self.max_delay,
            skip_per_mille: self.skip_per_mille,
            crash_per_mille: self.crash_per_mille,
            max_crashes: self.max_crashes.unwrap_or(self.crash_tolerance),
            horizon: self.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidExperiment(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported version {} (expected {CONFIG_VERSION})", self.version));
        }
        self.system()?;
        if self.skip_per_mille > 1000 || self.crash_per_mille > 1000 {
            return bad("per-mille probabilities must be at most 1000".into());
        }
        if self.max_delay == 0 {
            return bad("max_delay must be at least 1".into());
        }
        match self.schedule_mode {
            ScheduleMode::Random if self.seed.is_none() => bad("random mode requires a seed".into()),
            ScheduleMode::File if self.schedule_file.is_none() => bad("file mode requires schedule_file".into()),
            ScheduleMode::Chain => match self.chain_index {
                None => bad("chain mode requires chain_index".into()),
                Some(i) if i > self.servers => bad(format!("chain_index {i} exceeds {}", self.servers)),
                Some(_) => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Builds the schedule this experiment runs. `file` holds the contents
    /// of `schedule_file` in file mode and is ignored otherwise.
    pub fn schedule(&self, file: Option<&str>) -> Result<Schedule> {
        self.validate()?;
        let system = self.system()?;
        let schedule = match self.schedule_mode {
            ScheduleMode::Random => {
                let seed = self.seed.expect("validated");
                let workload = random_workload(&system, self.ops, self.max_gap, seed);
                random_schedule(&system, workload, &self.random_params(), seed)
            }
            ScheduleMode::File => {
                let text = file.ok_or_else(|| Error::InvalidExperiment("schedule file contents missing".into()))?;
                serde_json::from_str(text).map_err(|e| Error::InvalidExperiment(format!("schedule file: {e}")))?
            }
            ScheduleMode::Chain => {
                let i = self.chain_index.expect("validated") as usize;
                build_chain_alpha(&system)?.swap_remove(i)
            }
        };
        schedule.validate(&system)?;
        Ok(schedule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig::random(ProtocolKind::W2r1, SystemConfig::new(5, 2, 2, 1).unwrap(), 7)
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let c = sample();
        let text = c.to_toml();
        assert!(text.contains("version = 1"));
        assert!(text.contains("protocol = \"w2r1\""));
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn hash_tracks_content() {
        let a = sample();
        let mut b = sample();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = Some(8);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let c = ExperimentConfig::from_toml(
            "version = 1\nprotocol = \"w2r2-abd\"\nservers = 5\nwriters = 2\nreaders = 2\ncrash_tolerance = 1\nschedule_mode = \"random\"\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(c.ops, 10);
        assert_eq!(c.random_params().max_crashes, 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = sample().to_toml();
        for (from, to) in [
            ("protocol = \"w2r1\"", "protocol = \"paxos\""),
            ("version = 1", "version = 2"),
            ("seed = 7\n", ""),
            ("servers = 5", "servers = 1"),
        ] {
            let text = base.replace(from, to);
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{from} -> {to}");
        }
        assert!(ExperimentConfig::from_toml(&format!("{base}bogus = 1\n")).is_err());
    }

    #[test]
    fn chain_mode_needs_index() {
        let mut c = sample();
        c.schedule_mode = ScheduleMode::Chain;
        assert!(c.validate().is_err());
        c.chain_index = Some(2);
        assert_eq!(c.schedule(None).unwrap().workload.len(), 3);
    }

    #[test]
    fn file_mode_reads_json() {
        let c = sample();
        let s = c.schedule(None).unwrap();
        let mut f = c.clone();
        f.schedule_mode = ScheduleMode::File;
        f.schedule_file = Some("s.json".into());
        assert_eq!(f.schedule(Some(&serde_json::to_string(&s).unwrap())).unwrap(), s);
        assert!(f.schedule(Some("{")).is_err());
    }
}
