//! Experiment configuration, orchestration and output.

mod config;
mod output;
mod run;
mod stats;

pub use config::{load_config, save_config, CodebookConfig, ExperimentConfig, LearningConfig, Policy, SystemConfig};
pub use output::{csv_header, emit_csv, load_csv, read_csv, write_csv};
pub use run::{build_env, run_experiment, run_policy, RunRecord, RunRow, RunSummary};
pub use stats::{distribution_stats, moving_average, quantile, DistributionStats};
