//! Minimization of the Lawrence–Doniach energy for periodic Josephson vortex
//! lattices, together with its small-coupling asymptotic expansion.

pub mod asymptotics;
pub mod cli;
pub mod energy;
pub mod error;
pub mod fields;
pub mod frustration;
pub mod io;
pub mod lattice;
pub mod minimize;
pub mod poisson;
pub mod spectral;

pub use error::{LdError, Result};
