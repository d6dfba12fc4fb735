//! Subsequence-gram embeddings.
//!
//! Every vocabulary token (a serialized sequence) owns one input row, and
//! every hashed item n-gram owns one of `bucket_count` bucket rows. A token is
//! represented by the mean of its own row and the rows of its grams; unseen
//! tokens fall back to the mean of their gram rows alone. Training is
//! skip-gram or CBOW with negative sampling over per-user sentences.

mod io;
pub mod objective;
mod train;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subseq::{self, NgramRange, SeqToken, SubseqError};

pub use io::{export_jsonl, load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{train, train_with_report, TrainReport};
pub use vocab::{build_vocab, NegativeSampler, TrainingCorpus, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("no token reaches min_count={min_count} ({distinct} distinct tokens)")]
    EmptyVocabulary { min_count: u64, distinct: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),
    #[error("non-finite loss at epoch {epoch}, sentence {sentence}, position {position}")]
    NonFiniteLoss {
        epoch: usize,
        sentence: usize,
        position: usize,
    },
    #[error("token {0} has no grams under the model's n-gram range")]
    NoGrams(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error(transparent)]
    Subseq(#[from] SubseqError),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrainMode {
    SkipGram,
    Cbow,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::SkipGram => "sg",
            TrainMode::Cbow => "cbow",
        })
    }
}

impl FromStr for TrainMode {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sg" | "skipgram" | "skip-gram" => Ok(TrainMode::SkipGram),
            "cbow" => Ok(TrainMode::Cbow),
            other => Err(EmbedError::InvalidHyperparams(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub mode: TrainMode,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub ngrams: NgramRange,
    pub bucket_count: u32,
    pub min_count: u64,
    /// Frequent-token subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
    /// 1 trains deterministically; more threads train lock-free over
    /// sentence shards and are only statistically reproducible.
    pub threads: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            mode: TrainMode::SkipGram,
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
            ngrams: NgramRange::default(),
            bucket_count: 2_000_000,
            min_count: 1,
            subsample: None,
            threads: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |msg: &str| Err(EmbedError::InvalidHyperparams(msg.to_owned()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be positive and finite");
        }
        if self.bucket_count == 0 {
            return bad("bucket_count must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if let Some(t) = self.subsample {
            if !(t.is_finite() && t > 0.0) {
                return bad("subsample threshold must be positive");
            }
        }
        self.ngrams.validate()?;
        Ok(())
    }
}

/// Dense row-major `f32` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has the wrong length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn into_vec(self) -> Vec<f32> {
        self.data
    }
}

/// Trained (or freshly initialized) embedding model. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    hp: Hyperparams,
    vocab: Vocabulary,
    /// Token rows `0..V`, then bucket rows `V..V+bucket_count`.
    input: Matrix,
    context: Matrix,
    token_buckets: Vec<Vec<u32>>,
}

impl EmbeddingModel {
    pub(crate) fn from_parts(hp: Hyperparams, vocab: Vocabulary, input: Matrix, context: Matrix) -> Self {
        let token_buckets = vocab
            .tokens()
            .iter()
            .map(|t| subseq::subword_buckets(t.items(), hp.ngrams, hp.bucket_count))
            .collect();
        EmbeddingModel {
            hp,
            vocab,
            input,
            context,
            token_buckets,
        }
    }

    pub fn dim(&self) -> usize {
        self.hp.dim
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn ngrams(&self) -> NgramRange {
        self.hp.ngrams
    }

    pub fn bucket_count(&self) -> u32 {
        self.hp.bucket_count
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn input_vectors(&self) -> &Matrix {
        &self.input
    }

    pub fn context_vectors(&self) -> &Matrix {
        &self.context
    }

    pub fn token_row(&self, idx: usize) -> &[f32] {
        self.input.row(idx)
    }

    pub fn bucket_row(&self, bucket: u32) -> &[f32] {
        self.input.row(self.vocab.len() + bucket as usize)
    }

    pub fn context_row(&self, idx: usize) -> &[f32] {
        self.context.row(idx)
    }

    /// Input-matrix rows averaged into `token`'s representation.
    pub fn composition_rows(&self, token: &SeqToken) -> Vec<usize> {
        let v = self.vocab.len();
        match self.vocab.index_of(token.text()) {
            Some(idx) => std::iter::once(idx)
                .chain(self.token_buckets[idx].iter().map(|&b| v + b as usize))
                .collect(),
            None => subseq::subword_buckets(token.items(), self.hp.ngrams, self.hp.bucket_count)
                .into_iter()
                .map(|b| v + b as usize)
                .collect(),
        }
    }

    /// Vector of `token`: the mean of its own row (when in the vocabulary)
    /// and its gram bucket rows. Lone boundary markers are not part of the
    /// composition, so every row averaged in depends on the items.
    pub fn compose(&self, token: &SeqToken) -> Result<Vec<f32>, EmbedError> {
        let rows = self.composition_rows(token);
        if rows.is_empty() {
            return Err(EmbedError::NoGrams(token.to_string()));
        }
        let mut acc = vec![0f64; self.dim()];
        for &r in &rows {
            for (a, &x) in acc.iter_mut().zip(self.input.row(r)) {
                *a += f64::from(x);
            }
        }
        let n = rows.len() as f64;
        Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
    }

    pub fn compose_items<S: AsRef<str>>(&self, items: &[S]) -> Result<Vec<f32>, EmbedError> {
        self.compose(&SeqToken::from_items(items)?)
    }
}

/// Free-function form of [`EmbeddingModel::compose`].
pub fn compose(model: &EmbeddingModel, token: &SeqToken) -> Result<Vec<f32>, EmbedError> {
    model.compose(token)
}

/// Norms below this count as zero vectors.
pub const MIN_NORM: f64 = 1e-12;

/// Cosine similarity, or 0 when either vector is (numerically) zero.
pub fn similarity(a: &[f32], b: &[f32]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimMismatch(a.len(), b.len()));
    }
    let (mut ab, mut aa, mut bb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    let (na, nb) = (aa.sqrt(), bb.sqrt());
    if na < MIN_NORM || nb < MIN_NORM {
        return Ok(0.0);
    }
    Ok((ab / (na * nb)).clamp(-1.0, 1.0))
}
