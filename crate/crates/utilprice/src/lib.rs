//! File formats, report writers, batch drivers and the command-line
//! interface around [`utilprice_core`].

pub mod battery;
pub mod cli;
pub mod error;
pub mod formats;
pub mod mc;
pub mod report;

pub use error::{CliError, CliResult};
