//! Experiment runners and report emission.

pub mod benchmark;
pub mod experiments;
pub mod report;

pub use benchmark::{Benchmark, BenchmarkConfig, PlannedAttack};
pub use experiments::*;
pub use report::{emit_report, Report, Tabular};
