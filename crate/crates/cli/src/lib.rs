//! Command-line driver for the scene recovery pipeline: single images,
//! directories, corpus statistics and synthetic haze generation.

pub mod batch;
pub mod config;
pub mod pipeline;
pub mod quality;
pub mod stats;

pub use config::{Overrides, PipelineConfig};
pub use pipeline::{run_pipeline, run_single, RecoveryReport};
