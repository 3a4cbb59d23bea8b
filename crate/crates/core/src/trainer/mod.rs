//! Curriculum training loop and baseline suites.

mod config;
mod run;
mod suite;

pub use config::{ExperimentConfig, PoolConfig, ScheduleConfig, CONFIG_VERSION};
pub use run::{build_pools, train, EvalSnapshot, LogRecord, Pools, RunLog, StepRecord, TrainOutcome};
pub use suite::{run_baseline_suite, suite_variants, SuiteResult, Variant};
