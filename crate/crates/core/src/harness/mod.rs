//! Evaluation configurations, runs, sweeps and report comparison.
//!
//! A run trains embeddings on part A, indexes the configuration's training
//! parts, queries once per user with test sequences and scores the returned
//! lists with ROUGE-1 and ROUGE-L.

use std::path::PathBuf;

use thiserror::Error;

mod config;
mod plan;
mod report;
mod sweep;
pub mod synthetic;

pub use config::{Aggregation, ConfigType, EvalConfig, DEFAULT_QUERY_PREFIX_FRACTION};
pub use plan::{prefix_len, Reference, RunPlan, UserQuery};
pub use report::{
    load_reports, read_reports, recommend_plan, run, run_with_model, save_reports, score_user, summarize,
    train_embeddings, write_reports, RunReport, RunStatus, UserScore, REPORT_METRICS,
};
pub use sweep::{compare_configs, sweep, Comparison, DeltaRow, SweepAxis, DIM_GRID, MAX_N_GRID};

use crate::corpus::CorpusError;
use crate::embed::EmbedError;
use crate::recindex::RecError;
use crate::rouge::RougeError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: expected key = value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("configuration {0} needs non-empty part(s) {1}")]
    EmptyParts(ConfigType, String),
    #[error("a sweep needs at least one value")]
    EmptySweep,
    #[error("comparison needs at least two successful reports, got {0}")]
    TooFewReports(usize),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Rec(#[from] RecError),
    #[error(transparent)]
    Rouge(#[from] RougeError),
}
