//! Command-line front end: configuration and the four commands.

pub mod commands;
pub mod config;

pub use commands::{ablate, detect, evaluate, simulate, Outcome};
pub use config::{Overrides, RunConfig};
