//! Command-line driver for the fish-bone survey pipeline.
//!
//! Stages hand off through files in the configured output directory and
//! record timings, warnings, provider calls and artifact digests in
//! `manifest.json` there.

pub mod app;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod stages;

pub use app::main_with;
pub use config::PipelineConfig;
pub use error::CliError;
pub use manifest::RunManifest;
