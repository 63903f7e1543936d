//! Command-line front end and HTTP trial server for the matrix generator.

pub mod commands;
pub mod report;
pub mod server;
