//! Library surface of the command-line front end: configuration parsing,
//! output rendering and subcommand orchestration, kept separate from the
//! binary so integration tests can drive it directly.

// Validation guards use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{run_convergence, run_sweep, run_validate, CliError, Overrides};
