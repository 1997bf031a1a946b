//! Capacity, stale-block ratio and consistency of Proof-of-Work blockchains over unreliable links.

pub mod cli;
pub mod edtmc;
pub mod error;
pub mod markov;
pub mod models;
pub mod netmodel;
pub mod simulator;
pub mod strongcons;
pub mod twominer;

pub use error::{Error, Result};
pub use netmodel::{CapacityResult, NetworkScenario};
