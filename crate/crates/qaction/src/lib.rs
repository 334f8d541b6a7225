//! Config files, output formats and command implementations for the
//! `qaction` binary.
//!
//! Commands read one JSON config each and write plot-ready tables (CSV,
//! JSON records or gnuplot whitespace tables) and JSON reports into an
//! output directory. See the README for the config schemas.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{CommandError, Report, RunOptions};
