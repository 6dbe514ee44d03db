//! Command-line front end: configuration, profile files, the ground-state
//! cache and sweep reports.

mod app;
pub mod cache;
pub mod config;
pub mod error;
pub mod profile;
pub mod report;

pub use app::run;
pub use error::CliError;
