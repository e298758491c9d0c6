//! Benchmark engine, file formats and command-line front end on top of
//! [`kanbench_core`].

pub mod bench;
pub mod cli;
pub mod csv_io;
pub mod error;
pub mod model_io;

pub use error::{BenchError, Result};
