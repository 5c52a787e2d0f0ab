//! Configuration, experiment dispatch and trace serialization behind the
//! `sim` command-line tool.

mod config;
mod experiment;
mod trace;

pub use config::*;
pub use experiment::{config_echo, linspace, logspace, run_experiment, VERSION};
pub use trace::{emit, format_number, ingest, Column, TraceRecord};
