//! Command-line pipeline over the `onoma-core` library: file formats,
//! configuration and the stage orchestration behind the `onoma` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod stages;

pub use commands::{run, Cli};
pub use error::CliError;

/// Sizes the global thread pool from `ONOMA_THREADS` (0 or unset: one
/// thread per core).
pub fn init_threads() -> Result<(), CliError> {
    let n = match std::env::var("ONOMA_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("ONOMA_THREADS must be a nonnegative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Invariant(e.to_string()))
}
