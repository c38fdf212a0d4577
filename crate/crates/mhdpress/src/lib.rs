//! Tetrahedral finite-element solver for the stationary incompressible MHD
//! system with pressure boundary conditions, zero tangential traces for the
//! velocity and the magnetic field, and flux constraints on internal
//! boundary components.

pub mod error;
pub mod cli;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod mhd;
pub mod kernel;
pub mod nonlinear;
pub mod quadrature;
pub mod scalar_solvers;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
