//! Monte-Carlo scenario runner on top of `isac-core`.
//!
//! A [`ScenarioConfig`] names a scenario kind, its dimensions and a sweep;
//! [`run_scenario`] evaluates every (sweep point, trial) pair in parallel and
//! [`emit_results`] writes the long-format table
//! `scenario,param_name,param_value,trial,metric,value` as CSV or JSON.

mod config;
mod output;
mod scenario;

pub use config::{ScenarioConfig, ScenarioKind, StageOrderConfig};
pub use output::{
    emit_results, read_csv_records, to_records, write_results, Metric, OutputFormat, Record, TrialResult, TrialTag,
};
pub use scenario::{estimation_observation, run_scenario, tradeoff_instance, TradeoffInstance};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] isac_core::IsacError),

    #[error("no results to write")]
    EmptyResults,

    #[error("non-finite metric: {0}")]
    NonFinite(String),

    #[error("cannot write output {0}")]
    Output(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
