//! Command implementations behind the `saferl` binary: training runs,
//! suite verification with Table-style summaries, violation maps, greedy
//! rollout logs, the six-policy ablation and the brute-force grid oracle.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod map;
pub mod table;

pub use error::{CliError, CliResult, ErrorKind};
