//! Batch runner, metrics, persistence, figures and acceptance checks.

pub mod acceptance;
pub mod audit;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod runner;

pub use metrics::{compute_metrics, MetricsRow};
pub use runner::{
    cell_rng, cell_seed, read_long_csv, RUN_STREAM, run_cell, run_cell_env, run_suite, write_outputs, CellOutcome, LongRow,
    SuiteConfig, SuiteResults,
};
