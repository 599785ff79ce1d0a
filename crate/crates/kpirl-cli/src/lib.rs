//! Command-line front end: configuration, file formats, and the
//! experiment drivers behind the `kpirl` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
