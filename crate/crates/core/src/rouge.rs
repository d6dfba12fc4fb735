//! ROUGE-N and ROUGE-L over item sequences, plus two order-agnostic and
//! exact-match baselines.
//!
//! With references `R` and one system sequence `s`:
//!
//! * ROUGE-N recall `= Σ_r match_n(r, s) / Σ_r |grams_n(r)|`,
//!   precision `= Σ_r match_n(r, s) / |grams_n(s)|`, where `match_n` is the
//!   clipped multiset intersection of the two n-gram bags.
//! * ROUGE-L recall `= Σ_r LCS(r, s) / Σ_r |r|`,
//!   precision `= Σ_r LCS(r, s) / |s|`.
//!
//! ROUGE-N and the baselines report the harmonic mean of precision and
//! recall. ROUGE-L reports the LCS F-measure `(1 + β²) P R / (R + β² P)` with
//! `β = P / R`.
//!
//! With several references the precision sums can exceed 1; such values are
//! clamped and flagged on the score.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RougeError {
    #[error("n must be at least 1")]
    ZeroN,
    #[error("at least one reference sequence is required")]
    NoReferences,
    #[error("evaluation sequences must be non-empty")]
    EmptySequence,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    RougeN(usize),
    RougeL,
    Reluctant,
    Strict,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::RougeN(n) => write!(f, "rouge{n}"),
            Metric::RougeL => f.write_str("rougeL"),
            Metric::Reluctant => f.write_str("reluctant"),
            Metric::Strict => f.write_str("strict"),
        }
    }
}

impl FromStr for Metric {
    type Err = RougeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rougeL" | "rouge-l" | "rougel" => Ok(Metric::RougeL),
            "reluctant" => Ok(Metric::Reluctant),
            "strict" => Ok(Metric::Strict),
            other => other
                .strip_prefix("rouge-")
                .or_else(|| other.strip_prefix("rouge"))
                .and_then(|n| n.parse().ok())
                .filter(|&n| n >= 1)
                .map(Metric::RougeN)
                .ok_or_else(|| RougeError::UnknownMetric(other.to_owned())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub metric: Metric,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Set when precision or recall had to be clamped to 1.
    pub clamped: bool,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// LCS-based F-measure with `β = P / R`. It equals the harmonic mean when
/// precision and recall agree and is 0 when either is 0.
pub fn lcs_f_measure(precision: f64, recall: f64) -> f64 {
    if precision <= 0.0 || recall <= 0.0 {
        return 0.0;
    }
    let beta2 = (precision / recall).powi(2);
    (1.0 + beta2) * precision * recall / (recall + beta2 * precision)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl RougeScore {
    /// Builds a score, clamping precision and recall into `[0, 1]`.
    pub fn new(metric: Metric, precision: f64, recall: f64) -> Self {
        let clamped = precision > 1.0 || recall > 1.0;
        if clamped {
            log::debug!("{metric}: clamping precision {precision} / recall {recall} to 1");
        }
        let (precision, recall) = (precision.clamp(0.0, 1.0), recall.clamp(0.0, 1.0));
        RougeScore {
            metric,
            precision,
            recall,
            f_measure: match metric {
                Metric::RougeL => lcs_f_measure(precision, recall),
                _ => f_measure(precision, recall),
            },
            clamped,
        }
    }

    pub fn zero(metric: Metric) -> Self {
        RougeScore::new(metric, 0.0, 0.0)
    }
}

/// A system sequence and the references it is judged against.
#[derive(Clone, Debug)]
pub struct EvalInstance<'a, T> {
    references: Vec<&'a [T]>,
    system: &'a [T],
}

impl<'a, T> EvalInstance<'a, T> {
    pub fn new(references: Vec<&'a [T]>, system: &'a [T]) -> Result<Self, RougeError> {
        if references.is_empty() {
            return Err(RougeError::NoReferences);
        }
        if system.is_empty() || references.iter().any(|r| r.is_empty()) {
            return Err(RougeError::EmptySequence);
        }
        Ok(EvalInstance { references, system })
    }

    pub fn references(&self) -> &[&'a [T]] {
        &self.references
    }

    pub fn system(&self) -> &'a [T] {
        self.system
    }
}

fn gram_counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn gram_total(len: usize, n: usize) -> usize {
    (len + 1).saturating_sub(n)
}

pub fn rouge_n<T: Eq + Hash>(inst: &EvalInstance<'_, T>, n: usize) -> Result<RougeScore, RougeError> {
    if n == 0 {
        return Err(RougeError::ZeroN);
    }
    let sys_counts = gram_counts(inst.system, n);
    let mut matched = 0;
    let mut ref_total = 0;
    for r in &inst.references {
        ref_total += gram_total(r.len(), n);
        matched += gram_counts(r, n)
            .iter()
            .map(|(g, &c)| c.min(sys_counts.get(g).copied().unwrap_or(0)))
            .sum::<usize>();
    }
    let sys_total = gram_total(inst.system.len(), n);
    Ok(RougeScore::new(
        Metric::RougeN(n),
        ratio(matched, sys_total),
        ratio(matched, ref_total),
    ))
}

/// Longest common subsequence length in O(|a|·|b|) time and
/// O(min(|a|, |b|)) memory.
pub fn lcs_length<T: Eq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[short.len()]
}

pub fn rouge_l<T: Eq>(inst: &EvalInstance<'_, T>) -> RougeScore {
    let lcs_sum: usize = inst.references.iter().map(|r| lcs_length(r, inst.system)).sum();
    let ref_len: usize = inst.references.iter().map(|r| r.len()).sum();
    RougeScore::new(
        Metric::RougeL,
        ratio(lcs_sum, inst.system.len()),
        ratio(lcs_sum, ref_len),
    )
}

/// Order-agnostic item-set overlap (reluctant) and whole-sequence equality
/// (strict).
pub fn baseline_scores<T: Eq + Hash>(inst: &EvalInstance<'_, T>) -> (RougeScore, RougeScore) {
    let sys: HashSet<&T> = inst.system.iter().collect();
    let refs: HashSet<&T> = inst.references.iter().flat_map(|r| r.iter()).collect();
    let common = sys.intersection(&refs).count();
    let reluctant = RougeScore::new(Metric::Reluctant, ratio(common, sys.len()), ratio(common, refs.len()));
    let exact = inst.references.iter().any(|r| *r == inst.system);
    let s = if exact { 1.0 } else { 0.0 };
    (reluctant, RougeScore::new(Metric::Strict, s, s))
}

pub fn score<T: Eq + Hash>(inst: &EvalInstance<'_, T>, metric: Metric) -> Result<RougeScore, RougeError> {
    Ok(match metric {
        Metric::RougeN(n) => rouge_n(inst, n)?,
        Metric::RougeL => rouge_l(inst),
        Metric::Reluctant => baseline_scores(inst).0,
        Metric::Strict => baseline_scores(inst).1,
    })
}

/// Scores of one recommendation list against one reference set.
#[derive(Clone, Debug, PartialEq)]
pub struct ListScore {
    /// One entry per requested metric, in request order.
    pub scores: Vec<RougeScore>,
    pub empty: bool,
    pub clamp_events: usize,
}

impl ListScore {
    pub fn get(&self, metric: Metric) -> Option<&RougeScore> {
        self.scores.iter().find(|s| s.metric == metric)
    }
}

/// Scores every recommended sequence against all references and keeps, per
/// metric, the elementwise maximum of precision, recall and F. An empty list
/// scores zero and is flagged.
pub fn score_list<T, R, S>(references: &[R], recommended: &[S], metrics: &[Metric]) -> Result<ListScore, RougeError>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
    S: AsRef<[T]>,
{
    let refs: Vec<&[T]> = references.iter().map(AsRef::as_ref).collect();
    if refs.is_empty() {
        return Err(RougeError::NoReferences);
    }
    let mut best: Vec<RougeScore> = metrics.iter().map(|&m| RougeScore::zero(m)).collect();
    let mut clamp_events = 0;
    for rec in recommended {
        let inst = EvalInstance::new(refs.clone(), rec.as_ref())?;
        for (slot, &metric) in best.iter_mut().zip(metrics) {
            let s = score(&inst, metric)?;
            clamp_events += usize::from(s.clamped);
            slot.precision = slot.precision.max(s.precision);
            slot.recall = slot.recall.max(s.recall);
            slot.f_measure = slot.f_measure.max(s.f_measure);
            slot.clamped |= s.clamped;
        }
    }
    Ok(ListScore {
        scores: best,
        empty: recommended.is_empty(),
        clamp_events,
    })
}
