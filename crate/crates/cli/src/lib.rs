//! File formats, command line and simulation-study harness for the
//! `cohsmix` clustering library.

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod manifest;

pub use error::{HarnessError, Result};
