//! Config-driven trials, aggregation and result files.

mod config;
mod report;
mod trial;

pub use config::{
    default_batch_size, default_dataset, default_epochs, parse_key_values, Entry, ExperimentSpec,
    DEFAULT_FINAL_TRIALS, DEFAULT_SEARCH_TRIALS,
};
pub use report::{
    compare, emit_report, emit_tables, load_experiments, pick_baseline, read_results_csv, read_trials_csv, write_results_csv,
    write_spec, write_trace_csv, write_trials_csv, ComparisonReport, ResultRow, RESULTS_HEADER, TRACE_HEADER,
    TRIALS_HEADER,
};
pub use trial::{
    accuracy, resolve_data_root, run_experiment, run_trial, train_single_rate, train_trial, DataPair,
    ExperimentResult, TrainedTrial, TrialResult, DATA_DIR_ENV,
};
pub(crate) use trial::with_pool;

pub use crate::schedule::parse_schedule_spec;
