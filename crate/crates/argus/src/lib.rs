//! Trace formats, model files, the home simulator and experiment harness
//! around `argus-core`.

pub mod cli;
pub mod clock;
pub mod error;
pub mod harness;
pub mod model_io;
pub mod simulator;
pub mod trace_io;

pub use error::{Error, Result};
