//! Driver around `bilayer-core`: TOML run configurations, deterministic
//! per-chain seeding, bin-boundary checkpoints, worker-pool execution,
//! CSV/JSON result tables, and finite-size analysis commands.

pub mod analyze;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod seed;
pub mod tasks;
