//! Experiment harness: configuration, seeded Monte Carlo orchestration,
//! aggregation with confidence intervals, separation sweeps, the exact-check
//! suite, and result persistence. The `persim` binary is a thin CLI over
//! these modules.

pub mod config;
pub mod emit;
pub mod runner;
pub mod suite;
