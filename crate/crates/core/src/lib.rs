//! Portfolio selection as a QUBO: market simulation, bucketed encoding,
//! clique embedding on Chimera hardware graphs, a spin-vector annealing
//! surrogate with forward and reverse schedules, classical baselines and a
//! time-to-solution benchmark harness.

// Validation uses `!(x > 0.0)` style checks so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod bench;
pub mod chimera;
pub mod cli;
pub mod error;
pub mod market;
pub mod qubo;
pub mod solvers;

pub use error::{Error, Result};
pub use qubo::{IsingInstance, QuboInstance, Selection};
