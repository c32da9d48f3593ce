//! File formats, run reports and the command-line front end for [`mccrf_core`].

pub mod cli;
pub mod error;
pub mod instance;
pub mod model;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
