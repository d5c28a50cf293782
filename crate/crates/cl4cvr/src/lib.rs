//! File formats, experiment runners and the command-line front end built on
//! `cl4cvr-core`.

pub mod cli;
pub mod config;
pub mod output;
pub mod runner;
pub mod schema;

pub use cl4cvr_core as core;
