//! Monte Carlo potential theory for Lévy operators with drift and killing.
//!
//! The operator `A − b·∇ − κ` is described by a Lévy triplet, a drift field
//! and a killing rate. Paths of the associated process are simulated with an
//! Euler scheme or with walk-on-spheres, and estimators for Green functions,
//! harmonic measures, resolvents and hitting probabilities are built on top.

pub mod bocher;
pub mod error;
pub mod kernels;
pub mod levy;
pub mod mc;
pub mod path;
pub mod polarity;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod stable;
pub mod stats;

pub use error::{Error, Result};
