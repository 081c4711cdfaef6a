//! Command-line front end for `tsobs`: loads a JSON run configuration and runs
//! the design, certification and simulation pipelines.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

pub use commands::{execute, Command, Invocation, Outcome};
pub use config::RunConfig;
pub use error::{CliError, ExitStatus};
