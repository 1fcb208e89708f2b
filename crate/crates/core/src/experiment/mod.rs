//! Sweep orchestration: configuration, runs over a grid of one variable,
//! persisted logs, audit and plots.

mod config;
mod plot;
mod sweep;

pub use config::{DatasetSpec, ExperimentConfig, Params, PrivacySpec, SweepConfig, SweepVar};
pub use plot::emit_plots;
pub use sweep::{
    audit, parse_sweep_csv, rows_to_csv, run_sweep, summarize, write_sweep, AuditReport, GridOutcome,
    Manifest, ManifestPoint, SeedFiles, SeedOutcome, SweepOutput, SweepRow, SWEEP_HEADER,
};
