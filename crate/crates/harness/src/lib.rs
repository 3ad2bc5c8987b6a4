//! Experiment harness: manifests and splits, dataset loading, training one
//! model per (patch size, QP), evaluation, sweeps and timing.

pub mod bench;
pub mod error;
pub mod experiment;
pub mod manifest;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
pub use experiment::{run_experiment, sweep, ExperimentReport};
pub use manifest::{Entry, Label, Manifest, Split};
pub use metrics::{Confusion, EvalReport, Metrics};
