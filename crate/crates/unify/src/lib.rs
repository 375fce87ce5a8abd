//! Files, parallel execution and the `trek-unify` command line around
//! [`trek_core`].

pub mod cli;
pub mod data;
pub mod error;
pub mod exec;
pub mod graph_file;
pub mod manifest;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};
