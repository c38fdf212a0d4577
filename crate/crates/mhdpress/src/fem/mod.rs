//! Constrained finite-element spaces, fields, assembly and norms.

pub mod assemble;
pub mod field;
pub mod norms;
pub mod shape;
pub mod space;

pub use field::Field;
pub use norms::{compute_norm, NormId};
pub use space::{build_space, BcSpec, ConstrainedSpace, Kind};
