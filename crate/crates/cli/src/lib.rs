//! Command-line front end: market description files, mechanism evaluation,
//! dominance queries, property sweeps and bundled example reproduction.

pub mod commands;
pub mod examples;
pub mod spec;

pub use commands::{CliError, Report, Status};
pub use spec::{parse_market_spec, render_market_spec, SpecError};
