//! Experiment harness around the simulation core: configuration files,
//! run artifacts (CSV snapshots, step traces, manifests, optional VTK),
//! and the drivers behind the command-line subcommands.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{FileConfig, Problem, RunConfig};
