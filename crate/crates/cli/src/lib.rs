//! Library half of the `noisemap` command line tool. The binary only parses
//! arguments and dispatches here, so the pipeline is testable in-process.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod fixtures;
pub mod plot;
