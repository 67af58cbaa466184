//! Command-line driver for `oppmod-core`: config files, checkpoints, metrics
//! CSVs and SVG charts.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod plot;

pub use checkpoint::Checkpoint;
pub use commands::{run, Cli};
