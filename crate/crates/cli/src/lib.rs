//! Library half of the `audit` binary: config resolution, artifact files and
//! the staged pipeline behind `run-all`.

pub mod artifacts;
pub mod pipeline;
pub mod settings;

pub use pipeline::{run_all, RunError, RunOptions, RunSummary};
pub use settings::{resolve, Overrides, SettingsError, CONFIG_ENV};
