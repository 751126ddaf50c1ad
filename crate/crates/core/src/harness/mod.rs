//! Experiment runner, configuration, CSV output and the command-line tool.

pub mod cli;
pub mod config;
pub mod csvfmt;
mod experiment;

pub use experiment::*;
