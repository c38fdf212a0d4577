//! Manufactured solutions, convergence studies, compatibility audits and
//! the named-invariant registry.

pub mod mms;
pub mod registry;
pub mod study;

pub use mms::{builtin_cases, case_by_name, MmsCase};
pub use registry::{run_invariants, InvariantResult, EXPECTED_INVARIANTS};
pub use study::{compat_audit, convergence_study, CompatAudit, RateTable, SolverId};
