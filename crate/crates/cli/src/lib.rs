//! Command-line experiment runner for `mfplay`.
//!
//! [`config`] parses run files, [`run`] trains and evaluates and writes the
//! artifacts, [`plotdata`] turns a finished run directory into
//! whitespace-delimited series for external plotting.

pub mod config;
pub mod plotdata;
pub mod run;

pub use config::{parse_config, parse_config_with, ConfigError, Experiment, RunConfig};
pub use plotdata::{emit_plotdata, PlotError};
pub use run::{run, RunError, Summary};
