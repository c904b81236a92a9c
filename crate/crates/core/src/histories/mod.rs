//! Operation histories, the atomicity checker, its brute-force oracle and
//! the MWA0–MWA4 property checks.

mod checker;
mod generate;
mod model;
mod mwa;

pub use checker::{
    brute_force_atomic, check_atomic, verify_permutation, AtomicityVerdict, Certificate, CycleStep,
    ORACLE_MAX_OPS,
};
pub use generate::random_history;
pub use model::{check_wellformed, History, Instant, OpKind, OpRecord};
pub use mwa::{check_mwa, MwaProperty, MwaReport, MwaViolation};

#[cfg(test)]
pub(crate) use model::build;
