//! Experiment driver: rate sweeps, identity verification suites and
//! lower-bound reports on top of `barron-core`.

pub mod error;
pub mod lower;
pub mod spec;
pub mod sweep;
pub mod verify;

pub use error::CliError;
