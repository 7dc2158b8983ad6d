//! BRACE variants.

pub mod brace;
pub mod registry;
pub mod trace;

pub use brace::{
    run_brace, run_brace_fast, run_brace_partial, run_configured, run_recert, stopping_check, BraceConfig,
    CheckSchedule, Objective,
};
pub use trace::{PhaseEvent, PhaseRecord, RoundMode, RoundRecord, RunOutcome, RunTrace, StructuralVerdict};
pub use registry::{Algorithm, Track};
