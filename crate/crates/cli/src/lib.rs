//! Batch experiment runner behind the `lrsens` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::Config;
pub use run::{load_model, run_experiment, write_outputs, Model, RunOutput};
