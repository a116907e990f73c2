//! Weakly coupled degenerate elliptic systems with balanced quasi-monotone
//! coupling.
//!
//! The unknowns of an `m`-component system are split into two groups of sizes
//! `m1` and `m2`. Inside a group the coupling is cooperative, across groups it
//! is competitive. The crate provides
//!
//! * an operator abstraction with built-in families ([`operator`]),
//! * sampled verification of the structural hypotheses ([`structure`]),
//! * monotone finite-difference discretization on box grids ([`grid`]),
//! * discrete super-sub / sub-super classification and lattice operations
//!   ([`viscosity`]),
//! * barrier construction for the competitive example ([`barrier`]),
//! * a sandwich relaxation between the barriers plus an explicit pseudo-time
//!   oracle ([`perron`]),
//! * configuration, pipeline orchestration and report emission ([`pipeline`]).

pub mod barrier;
pub mod error;
mod linalg;
pub mod operator;
pub mod perron;
pub mod pipeline;
pub mod grid;
pub mod structure;
pub mod viscosity;

pub use error::{Error, Result};
