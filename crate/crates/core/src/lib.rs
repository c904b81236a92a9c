//! Deterministic simulation and checking of multi-writer atomic register
//! emulations over crash-prone servers.
//!
//! The crate is layered bottom-up: [`register`] holds the value domain and
//! the admissibility predicate, [`automata`] the protocol state machines,
//! [`simnet`] the discrete-event simulator, [`histories`] the atomicity and
//! MWA checkers, [`chains`] the chain constructions and contradiction search,
//! and [`experiment`] the configuration and command logic behind the CLI.

pub mod automata;
pub mod chains;
pub mod error;
pub mod experiment;
pub mod histories;
pub mod ids;
pub mod register;
pub mod simnet;

pub use error::{Error, Result};
pub use ids::{ClientId, OpId, ServerId};
