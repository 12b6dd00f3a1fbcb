//! Library surface of the benchmark CLI, exposed so integration tests can
//! drive the commands directly.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod svg;
