//! Command-line front end for `fbint`: configuration, dispatch and table output.

pub mod config;
pub mod presets;
pub mod run;
pub mod table;

pub use config::{Cli, RunConfig};
pub use run::{execute, main_with, run};
