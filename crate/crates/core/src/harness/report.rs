//! Running one configuration end to end and the CSV run report.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Aggregation, ConfigType, EvalConfig, HarnessError, Reference, RunPlan, UserQuery};
use crate::corpus::EvalSplit;
use crate::embed::{build_vocab, train, EmbeddingModel, TrainingCorpus};
use crate::recindex::{CandidateIndex, RecommendationList};
use crate::rouge::{score_list, Metric};

/// Metrics carried by run reports, in column order.
pub const REPORT_METRICS: [Metric; 2] = [Metric::RougeN(1), Metric::RougeL];

/// Scores of one user's recommendation list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UserScore {
    pub user_id: String,
    pub references: usize,
    pub recommendations: usize,
    pub rouge1_precision: f64,
    pub rouge1_recall: f64,
    pub rouge1_f: f64,
    pub rougel_precision: f64,
    pub rougel_recall: f64,
    pub rougel_f: f64,
    pub clamp_events: usize,
}

impl UserScore {
    fn values(&self) -> [f64; 6] {
        [
            self.rouge1_precision,
            self.rouge1_recall,
            self.rouge1_f,
            self.rougel_precision,
            self.rougel_recall,
            self.rougel_f,
        ]
    }

    fn set_values(&mut self, v: [f64; 6]) {
        [
            self.rouge1_precision,
            self.rouge1_recall,
            self.rouge1_f,
            self.rougel_precision,
            self.rougel_recall,
            self.rougel_f,
        ] = v;
    }
}

fn list_values<T: AsRef<[String]>>(refs: &[T], recommended: &[&[String]]) -> Result<([f64; 6], usize), HarnessError> {
    let ls = score_list(refs, recommended, &REPORT_METRICS)?;
    let (r1, rl) = (&ls.scores[0], &ls.scores[1]);
    Ok((
        [r1.precision, r1.recall, r1.f_measure, rl.precision, rl.recall, rl.f_measure],
        ls.clamp_events,
    ))
}

/// Scores a list against a user's references. Macro scores the list once
/// against all references; micro scores it against each reference alone and
/// averages. An empty list scores zero.
pub fn score_user(
    user_id: &str,
    references: &[Vec<String>],
    recommended: &[&[String]],
    aggregation: Aggregation,
) -> Result<UserScore, HarnessError> {
    let mut out = UserScore {
        user_id: user_id.to_owned(),
        references: references.len(),
        recommendations: recommended.len(),
        ..UserScore::default()
    };
    match aggregation {
        Aggregation::Macro => {
            let (v, clamps) = list_values(references, recommended)?;
            out.set_values(v);
            out.clamp_events = clamps;
        }
        Aggregation::Micro => {
            let mut sums = [0.0; 6];
            for r in references {
                let (v, clamps) = list_values(std::slice::from_ref(r), recommended)?;
                sums.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                out.clamp_events += clamps;
            }
            let n = references.len().max(1) as f64;
            out.set_values(sums.map(|s| s / n));
        }
    }
    Ok(out)
}

/// Corpus-level means: per user for macro, per reference for micro.
pub fn summarize(scores: &[UserScore], aggregation: Aggregation) -> [f64; 6] {
    let mut sums = [0.0; 6];
    let mut weight = 0.0;
    for s in scores {
        let w = match aggregation {
            Aggregation::Macro => 1.0,
            Aggregation::Micro => s.references as f64,
        };
        sums.iter_mut().zip(s.values()).for_each(|(acc, x)| *acc += w * x);
        weight += w;
    }
    if weight > 0.0 {
        sums.map(|s| s / weight)
    } else {
        sums
    }
}

/// Runs every planned query against the index.
pub fn recommend_plan<'p>(
    plan: &'p RunPlan<'_>,
    index: &CandidateIndex<'_>,
    k: usize,
) -> Result<Vec<(&'p UserQuery, RecommendationList)>, HarnessError> {
    plan.queries
        .iter()
        .map(|q| Ok((q, index.recommend(&q.query, k)?)))
        .collect()
}

fn reference_items(refs: &[Reference]) -> Vec<Vec<String>> {
    refs.iter().map(|r| r.items.clone()).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    #[default]
    Ok,
    Failed,
}

/// Summary of one run. Wall-clock time is kept in memory only so that the
/// CSV form is reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub status: RunStatus,
    pub error: String,
    pub config_type: ConfigType,
    pub aggregation: Aggregation,
    pub users_evaluated: usize,
    pub cold_start_users: usize,
    pub skipped_users: usize,
    pub empty_recommendations: usize,
    pub clamp_events: usize,
    pub leak_filtered: usize,
    pub candidates: usize,
    pub vocab_size: usize,
    pub rouge1_precision: f64,
    pub rouge1_recall: f64,
    pub rouge1_f: f64,
    pub rougel_precision: f64,
    pub rougel_recall: f64,
    pub rougel_f: f64,
    pub mode: String,
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub with_boundaries: bool,
    pub bucket_count: u32,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_count: u64,
    pub subsample: Option<f64>,
    pub seed: u64,
    pub k: usize,
    pub neighbors: usize,
    pub gap_seconds: i64,
    pub boundary: f64,
    pub query_prefix_fraction: f64,
    #[serde(skip)]
    pub wall_clock_ms: f64,
}

impl RunReport {
    /// Report with zero counts and scores echoing `config`.
    pub fn empty(label: impl Into<String>, config: &EvalConfig) -> Self {
        let hp = &config.hp;
        RunReport {
            label: label.into(),
            status: RunStatus::Ok,
            error: String::new(),
            config_type: config.config_type,
            aggregation: config.aggregation,
            users_evaluated: 0,
            cold_start_users: 0,
            skipped_users: 0,
            empty_recommendations: 0,
            clamp_events: 0,
            leak_filtered: 0,
            candidates: 0,
            vocab_size: 0,
            rouge1_precision: 0.0,
            rouge1_recall: 0.0,
            rouge1_f: 0.0,
            rougel_precision: 0.0,
            rougel_recall: 0.0,
            rougel_f: 0.0,
            mode: hp.mode.to_string(),
            dim: hp.dim,
            min_n: hp.ngrams.min_n,
            max_n: hp.ngrams.max_n,
            with_boundaries: hp.ngrams.with_boundaries,
            bucket_count: hp.bucket_count,
            window: hp.window,
            negatives: hp.negatives,
            epochs: hp.epochs,
            lr: hp.lr,
            min_count: hp.min_count,
            subsample: hp.subsample,
            seed: hp.seed,
            k: config.k,
            neighbors: config.neighbors,
            gap_seconds: config.gap_seconds,
            boundary: config.boundary,
            query_prefix_fraction: config.query_prefix_fraction,
            wall_clock_ms: 0.0,
        }
    }

    pub fn failed(label: impl Into<String>, config: &EvalConfig, error: &dyn std::fmt::Display) -> Self {
        RunReport {
            status: RunStatus::Failed,
            error: error.to_string(),
            ..RunReport::empty(label, config)
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// ROUGE-1 P/R and ROUGE-L P/R with their column names.
    pub fn table_metrics(&self) -> [(&'static str, f64); 4] {
        [
            ("rouge1_precision", self.rouge1_precision),
            ("rouge1_recall", self.rouge1_recall),
            ("rougel_precision", self.rougel_precision),
            ("rougel_recall", self.rougel_recall),
        ]
    }
}

/// Trains the embedding model on part A.
pub fn train_embeddings(config: &EvalConfig, split: &EvalSplit) -> Result<EmbeddingModel, HarnessError> {
    let corpus = TrainingCorpus::from_profiles(&split.part_a);
    let vocab = build_vocab(&corpus, config.hp.min_count)?;
    let mut hp = config.hp.clone();
    // Reported results always come from the deterministic trainer.
    hp.threads = 1;
    Ok(train(&corpus, vocab, &hp)?)
}

/// Trains on A, then evaluates `config` on `split`.
pub fn run(config: &EvalConfig, split: &EvalSplit) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let model = train_embeddings(config, split)?;
    let mut report = run_with_model(config, split, &model)?;
    report.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Evaluates `config` with an already trained model.
pub fn run_with_model(config: &EvalConfig, split: &EvalSplit, model: &EmbeddingModel) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let plan = RunPlan::new(split, config.config_type, config.query_prefix_fraction)?;
    let index = plan.build_index(model)?;
    let mut report = RunReport::empty(config.config_type.label(), config);
    let mut scores = Vec::with_capacity(plan.queries.len());
    for (query, list) in recommend_plan(&plan, &index, config.k)? {
        if list.is_empty() {
            report.empty_recommendations += 1;
        }
        let s = score_user(
            &query.user_id,
            &reference_items(&query.references),
            &list.item_lists(),
            config.aggregation,
        )?;
        report.clamp_events += s.clamp_events;
        scores.push(s);
    }
    [
        report.rouge1_precision,
        report.rouge1_recall,
        report.rouge1_f,
        report.rougel_precision,
        report.rougel_recall,
        report.rougel_f,
    ] = summarize(&scores, config.aggregation);
    if report.clamp_events > 0 {
        log::warn!(
            "{}: {} scores had precision or recall clamped to 1",
            report.label,
            report.clamp_events
        );
    }
    report.users_evaluated = scores.len();
    report.cold_start_users = plan.cold_start_users();
    report.skipped_users = plan.skipped_users;
    report.leak_filtered = plan.leak_filtered;
    report.candidates = index.len();
    report.vocab_size = model.vocab().len();
    report.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

pub fn write_reports<W: Write>(out: W, reports: &[RunReport]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_reports<R: Read>(input: R) -> Result<Vec<RunReport>, HarnessError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}

pub fn save_reports(path: impl AsRef<Path>, reports: &[RunReport]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })?;
    write_reports(file, reports)
}

pub fn load_reports(path: impl AsRef<Path>) -> Result<Vec<RunReport>, HarnessError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_reports(file)
}
