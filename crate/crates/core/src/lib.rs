//! Two-dimensional Navier-Stokes/Cahn-Hilliard solver with degenerate mobility.

pub mod cli;
pub mod energy;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod material;
pub mod phasefield;
pub mod quadrature;
pub mod sim;

pub use error::{NschError, Result};
