//! Command-line front end for ILR depth: ingestion of timestamp logs,
//! simulation, depth ranking, ternary contour grids and the histogram
//! convergence experiment.

pub mod commands;
pub mod expr;
pub mod ingest;
pub mod io;
pub mod run;

pub use io::{CliError, CliResult, Sample};
