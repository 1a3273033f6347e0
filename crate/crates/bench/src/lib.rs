//! Benchmark pipeline, study server and CLI plumbing on top of `srvqa-core`.

pub mod adapters;
pub mod cache;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod server;

pub use error::{BenchError, Result};
