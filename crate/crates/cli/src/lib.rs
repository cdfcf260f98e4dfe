//! Experiment runner: configuration, staged pipelines, manifests and reports.
//!
//! `comember run --config exp.toml --out runs/a` executes every stage of the
//! configured experiment and writes `runs/a/manifest.json`; `resume` picks an
//! interrupted or damaged run up again, and `report` folds the attack results
//! into one AUC grid.

pub mod config;
pub mod desk;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod summary;

pub use config::{AdversarialNonmembers, ExperimentConfig, ExperimentKind, ModelKind};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
pub use pipeline::{resume, run_config, run_experiment, RunOptions};
pub use report::{report, Report};
pub use summary::Summary;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
