//! File formats, thread-pool execution and the command-line front end of
//! the dynamic delay prediction toolkit.

pub mod cli;
pub mod error;
pub mod formats;
pub mod io;
pub mod parallel;
pub mod report;

pub use error::{CliError, Result};
