//! Command-line front end for `ihgp-core`: JSON run configurations, CSV
//! input and output, synthetic data generators and the subcommands.

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod generate;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
