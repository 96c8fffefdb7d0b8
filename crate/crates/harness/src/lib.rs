//! Experiment plumbing around the `hgac` engine: run configuration, metrics
//! and manifest files, reward curves, incidence heatmaps and the reference
//! baselines used to judge training.

pub mod baselines;
pub mod config;
pub mod incidence;
pub mod manifest;
pub mod metrics;
pub mod plot;
pub mod run;

pub use baselines::{eval_baselines, BaselineReport, ReturnStats};
pub use config::{out_root, resolve_scenario, RunConfig, ScalarKind, OUT_ROOT_VAR};
pub use manifest::{git_blob_sha1, RunManifest};
pub use run::{dump_run_incidence, final_mean_return, replay_check, run, DumpReport, PairingReport, ReplayReport};
