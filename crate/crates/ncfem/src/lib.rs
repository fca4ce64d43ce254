//! Solvers, certification checks, convergence studies and report writers
//! built on `ncfem-core`.

pub mod error;
pub mod report;
pub mod solver;
pub mod study;
pub mod verify;

pub use error::{Error, Result};
