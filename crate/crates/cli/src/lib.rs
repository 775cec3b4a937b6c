//! Command-line workflow around the `extentlab` library: station and grid
//! ingestion, TOML run configs, the simulate/fit/generate/analyze/report
//! pipeline and per-command run manifests.

pub mod config;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use manifest::RunManifest;
pub use pipeline::{run, Command, Invocation};
