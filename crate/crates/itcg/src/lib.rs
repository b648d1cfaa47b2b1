//! File formats, configuration and command-line front end for the guidance
//! experiments in `itcg-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod files;

pub use commands::{execute, run_cli, Cli, Command};
pub use config::Config;
