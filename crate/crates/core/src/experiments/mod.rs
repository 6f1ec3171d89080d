//! End-to-end commands, sweeps and synthetic data.

mod commands;
pub mod config;
mod sweep;
pub mod synthetic;

pub use commands::*;
pub use config::{RunConfig, Settings};
pub use sweep::*;
