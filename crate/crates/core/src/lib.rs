//! Numerical toolkit for the spectral gap of group actions.
//!
//! The crate builds reversible Markov chains, Cayley and Schreier graphs and
//! group convolution operators, and computes spectral radii, averaging-operator
//! norms, Cheeger constants, expander certificates and Lyapunov-exponent bounds.

pub mod error;
pub mod group;
pub mod linalg;
pub mod markov;
pub mod models;
pub mod spectral;
pub mod cheeger;
pub mod expanders;
pub mod lyapunov;

pub use error::{Error, Result};
