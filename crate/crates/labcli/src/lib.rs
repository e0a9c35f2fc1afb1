//! Experiment orchestration for the feature-channel-coding laboratory: one
//! runner per experiment family, deterministic multi-trial grids with
//! resumable per-trial records, JSON/CSV reports, and SVG heat maps.

pub mod config;
pub mod experiments;
pub mod heatmap;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::run_experiment;
pub use report::{RunReport, TrialRecord};
