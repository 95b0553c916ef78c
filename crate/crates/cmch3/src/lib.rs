//! Command-line companion to `cmch3-core`: run configuration, mesh and
//! field file formats, report generation, and the subcommand
//! implementations behind the `cmch3` binary.

pub mod config;
pub mod export;
pub mod fields;
pub mod report;
pub mod run;
