//! Suite orchestration and machine-readable reporting for the
//! dynamical-elliptic verification engine.

pub mod config;
pub mod output;
pub mod suites;

pub use config::{RunConfig, Suite};
pub use suites::{catalogue, run, RunOutcome};
