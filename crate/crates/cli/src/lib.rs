//! Command implementations behind the `bellwire` binary.

pub mod commands;
pub mod paper;
pub mod report;
