//! Monte Carlo harness: seeded streams, aggregation, sweeps and CSV output.

pub mod experiment;
pub mod output;
pub mod rng;
pub mod stats;
pub mod sweep;

pub use experiment::{
    run_experiment, trial_trace, Diagnostic, DiagnosticKind, Execution, ExperimentOptions, ExperimentReport, Trace,
};
pub use rng::{RandomPlan, STREAM_VERSION};
pub use sweep::{run_sweep, SweepRow};
