//! Optimistic model-based control of a jump process observed at the events
//! of a Poisson clock of intensity `1/ε`.
//!
//! The crate is organised bottom-up:
//!
//! - [`process`] simulates the controlled compound-Poisson state process;
//! - [`model`] holds drift/reward families and their stability certificates;
//! - [`learning`] fits parameters by least squares and builds confidence sets;
//! - [`planning`] solves the ergodic control problems, diffusive and jump;
//! - [`agent`] runs the optimistic learning loop with lazy re-planning;
//! - [`harness`] computes regret, its decomposition, sweeps and plots.

pub mod agent;
pub mod error;
pub mod harness;
pub mod learning;
pub mod model;
pub mod planning;
pub mod process;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
