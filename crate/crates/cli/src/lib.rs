//! Configuration, report emission and pipelines behind the `rayzero` binary.

pub mod config;
pub mod examples;
pub mod report;
pub mod run;
