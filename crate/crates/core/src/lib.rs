//! Numerical laboratory for random walks among random conductances on Z^d.

pub mod calculus;
pub mod cli;
pub mod environment;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod inequalities;
pub mod lattice;
pub mod rng;
pub mod solvers;
pub mod walker;

pub use error::{Error, Result};
