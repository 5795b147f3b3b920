//! Benchmark harness for the tiled heat and wide-stencil kernels: argument
//! parsing, timed runs with an optional correctness gate, sweeps and CSV output.

pub mod config;
pub mod csv;
pub mod error;
pub mod run;
pub mod sweep;

pub use config::{parse_args, Cli, FileConfig, Kernel, RunConfig, TileSetting};
pub use csv::{csv_row, csv_string, emit_csv, format_g, CSV_HEADER};
pub use error::BenchError;
pub use run::{run, verify_kernel, RunReport, VerifyResult};
pub use sweep::{anchored_speedups, speedups, sweep, SweepAxis};
