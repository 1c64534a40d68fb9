//! File formats, event logs, configuration, the HTTP session service and
//! the command line for pairwise pleasantness experiments built on
//! `pleasance-core`.

pub mod bundle;
pub mod cli;
pub mod config;
pub mod error;
pub mod eventlog;
pub mod formats;
pub mod presenter;
pub mod report;
pub mod service;

pub use error::{Error, Result};
