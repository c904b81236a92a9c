//! Register values, system configuration, feasibility and admissibility.

mod admissible;
mod config;
mod value;

pub use admissible::{admissible, max_admissible, AdmissibilityWitness, ENUMERATION_CAP};
pub use config::{feasible_w2r1, feasible_w2r2, SystemConfig};
pub use value::{value_compare, ReadAck, Value, ValueVector, WriterId};
