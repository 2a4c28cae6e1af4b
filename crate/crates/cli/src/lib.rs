//! Command-line front end for `trafficstab-core`: TOML configs, text
//! reports and CSV output.

pub mod commands;
pub mod config;
pub mod report;
pub mod table;
