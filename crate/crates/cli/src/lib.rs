//! Scenario-driven front end for the ion-addressing design toolkit.

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;

pub use commands::{cmd_crystal, cmd_design, cmd_sweep, SweepRequest};
pub use error::{exit, CliError};
pub use report::{RunReport, SCHEMA_VERSION};
pub use scenario::Scenario;
