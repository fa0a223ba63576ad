//! Command line and HTTP front ends for `knnvault` collections.

pub mod api;
pub mod cli;
pub mod classify_csv;
pub mod service;

pub use cli::{run, Cli, Command};
