//! Numerical toolkit for the periodic, even Ablowitz-Ladik lattice and its
//! weakly damped, driven perturbations.

pub mod acceptance;
pub mod cli;
pub mod darboux;
pub mod error;
pub mod evolve;
pub mod floquet;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod melnikov;
pub mod quadrature;
pub mod resonance;

pub use error::{Error, Result};
pub use linalg::C64;
