//! Configuration, replicated experiments, traces and reports.

mod config;
mod experiment;
mod markov_report;
mod verify;

pub use config::{
    load_config, CapsConfig, ExperimentConfig, GameConfig, GridConfig, MarkovConfig,
    MetricsConfig, OutputConfig, ScheduleConfig, WeightsConfig, BENCHMARK_JSON,
};
pub use experiment::{
    read_trace, recheck, run_experiment, summary_path, trace_path, wilson, BucketSummary,
    MetricsSummary, OracleMasks, Prepared, Proportion, RecheckReport, RunFinal, RunTally, Tally,
    TraceRow, Windows, TRACE_VERSION,
};
pub use markov_report::{analysis_exponents, analyze_markov, MarkovReport};
pub use verify::{oracle, verify, verify_spec, IdentityOutcome, OracleReport, VerifyReport, IDENTITY_TOL};
