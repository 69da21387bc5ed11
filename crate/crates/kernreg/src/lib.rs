//! File formats, evaluation tooling and the command-line front end built on
//! [`kernreg_core`].

pub mod bench;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod report;

pub use error::{Error, Result};
pub use kernreg_core as core;
