//! Transport in strongly disordered one-dimensional tight-binding lattices.
//!
//! Energies are measured in units of |J|, times in 1/|J| and distances in
//! lattice constants.

pub mod analysis;
pub mod closed;
pub mod dimer;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod lattice;
pub mod ode;
pub mod open;
pub mod special;
pub mod stats;
pub mod widths;

pub use error::{Error, Result};
