//! Statistics, Monte-Carlo experiments, result records and the command line.

pub mod cli;
pub mod experiments;
pub mod records;
pub mod stats;

pub use cli::cli_main;
pub use experiments::*;
pub use records::{ResultRecord, SCHEMA_VERSION};
