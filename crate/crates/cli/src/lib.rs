//! Configuration, drivers and artifact writers behind the `llso` binary.

pub mod backtest;
pub mod compare;
pub mod config;
pub mod data;
pub mod error;
pub mod optimize;
pub mod output;

pub use config::{RunSpec, Variant};
pub use error::{CliError, CliResult};
