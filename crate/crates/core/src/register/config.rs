use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ClientId, ServerId};

/// Population and failure budget of one emulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemConfig {
    pub servers: u32,
    pub writers: u32,
    pub readers: u32,
    /// Maximum number of servers that may crash (`t`).
    pub crash_tolerance: u32,
}

impl SystemConfig {
    pub fn new(servers: u32, writers: u32, readers: u32, crash_tolerance: u32) -> Result<Self> {
        let cfg = SystemConfig {
            servers,
            writers,
            readers,
            crash_tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.servers < 2 {
            return fail("need at least 2 servers");
        }
        if self.writers < 1 {
            return fail("need at least 1 writer");
        }
        if self.readers < 1 {
            return fail("need at least 1 reader");
        }
        if self.crash_tolerance < 1 {
            return fail("crash tolerance must be at least 1");
        }
        if self.crash_tolerance >= self.servers {
            return fail("crash tolerance must be below the server count");
        }
        Ok(())
    }

    /// Replies a round-trip waits for: `S - t`.
    pub fn quorum(&self) -> usize {
        (self.servers - self.crash_tolerance) as usize
    }

    pub fn server_ids(&self) -> impl Iterator<Item = ServerId> {
        (0..self.servers).map(ServerId)
    }

    pub fn client_ids(&self) -> impl Iterator<Item = ClientId> {
        (0..self.writers)
            .map(ClientId::Writer)
            .chain((0..self.readers).map(ClientId::Reader))
    }

    pub fn has_client(&self, c: ClientId) -> bool {
        match c {
            ClientId::Writer(i) => i < self.writers,
            ClientId::Reader(i) => i < self.readers,
        }
    }

    /// Largest admissibility degree a reader may test: `R + 1`.
    pub fn max_degree(&self) -> u32 {
        self.readers + 1
    }
}

/// `R < S/t - 2` over the rationals. With `t > 0` this is exactly
/// `(R + 2)·t < S`, so no division is needed.
pub fn feasible_w2r1(cfg: &SystemConfig) -> bool {
    let (s, t, r) = (
        u64::from(cfg.servers),
        u64::from(cfg.crash_tolerance),
        u64::from(cfg.readers),
    );
    (r + 2) * t < s
}

/// Multi-writer two-round emulations need a majority of correct servers.
pub fn feasible_w2r2(cfg: &SystemConfig) -> bool {
    2 * cfg.crash_tolerance < cfg.servers
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: u32, t: u32, r: u32) -> SystemConfig {
        SystemConfig::new(s, 2, r, t).unwrap()
    }

    #[test]
    fn feasibility_examples() {
        assert!(feasible_w2r1(&cfg(5, 1, 2)));
        assert!(!feasible_w2r1(&cfg(4, 1, 2)));
        assert!(feasible_w2r1(&cfg(9, 2, 2)));
    }

    #[test]
    fn feasibility_matches_rational_formula() {
        for s in 2..40u32 {
            for t in 1..s {
                for r in 1..12u32 {
                    let c = cfg(s, t, r);
                    let real = f64::from(r) < f64::from(s) / f64::from(t) - 2.0;
                    assert_eq!(feasible_w2r1(&c), real, "S={s} t={t} R={r}");
                    if feasible_w2r1(&c) {
                        // Every fast-read quorum of the largest degree still spans t+1 servers.
                        assert!(i64::from(s) - i64::from(r + 1) * i64::from(t) > i64::from(t));
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SystemConfig::new(1, 2, 2, 1).is_err());
        assert!(SystemConfig::new(3, 2, 2, 0).is_err());
        assert!(SystemConfig::new(3, 2, 2, 3).is_err());
        assert!(SystemConfig::new(3, 0, 2, 1).is_err());
    }
}
