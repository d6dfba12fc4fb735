//! Candidate index and top-k sequence recommendation.
//!
//! Candidates are composed once through the embedding model; a query is
//! composed the same way (unseen sequences fall back to their gram buckets)
//! and every candidate is scored by cosine similarity in a full scan.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Part, Sequence, UserProfile};
use crate::embed::{self, EmbedError, EmbeddingModel};
use crate::subseq::{self, SeqToken};

/// Default list length and neighbour count.
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_NEIGHBORS: usize = 10;

#[derive(Debug, Error)]
pub enum RecError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Subseq(#[from] subseq::SubseqError),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("candidate {token} belongs to a test part of this run")]
    Leakage { token: String },
    #[error("entry vector has dimension {got}, model has {want}")]
    DimMismatch { got: usize, want: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub token: SeqToken,
    pub vector: Vec<f32>,
    pub owner: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoredSequence {
    pub items: Vec<String>,
    pub score: f64,
    #[serde(skip)]
    pub text: String,
}

/// Top-k list for one query, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationList {
    pub query: SeqToken,
    pub ranked: Vec<ScoredSequence>,
}

impl RecommendationList {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn item_lists(&self) -> Vec<&[String]> {
        self.ranked.iter().map(|s| s.items.as_slice()).collect()
    }
}

/// Immutable pool of composed candidate sequences.
#[derive(Clone, Debug)]
pub struct CandidateIndex<'m> {
    model: &'m EmbeddingModel,
    entries: Vec<IndexEntry>,
    parts: Vec<Part>,
}

impl<'m> CandidateIndex<'m> {
    /// Composes every candidate; repeated token texts keep their first
    /// occurrence.
    pub fn build<'s, I>(model: &'m EmbeddingModel, candidates: I) -> Result<Self, RecError>
    where
        I: IntoIterator<Item = &'s Sequence>,
    {
        Self::build_guarded(model, candidates, &HashSet::new())
    }

    /// Like [`build`](Self::build) but fails if any candidate's token text is
    /// in `forbidden`.
    pub fn build_guarded<'s, I>(
        model: &'m EmbeddingModel,
        candidates: I,
        forbidden: &HashSet<String>,
    ) -> Result<Self, RecError>
    where
        I: IntoIterator<Item = &'s Sequence>,
    {
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for seq in candidates {
            let token = subseq::serialize(seq);
            if forbidden.contains(token.text()) {
                return Err(RecError::Leakage {
                    token: token.to_string(),
                });
            }
            if !seen.insert(token.text().to_owned()) {
                continue;
            }
            let vector = model.compose(&token)?;
            entries.push(IndexEntry {
                token,
                vector,
                owner: seq.user_id.clone(),
            });
        }
        Ok(CandidateIndex {
            model,
            entries,
            parts: Vec::new(),
        })
    }

    /// Index over precomputed entries (deduplicated by token text).
    pub fn from_entries(model: &'m EmbeddingModel, entries: Vec<IndexEntry>) -> Result<Self, RecError> {
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(entries.len());
        for e in entries {
            if e.vector.len() != model.dim() {
                return Err(RecError::DimMismatch {
                    got: e.vector.len(),
                    want: model.dim(),
                });
            }
            if seen.insert(e.token.text().to_owned()) {
                kept.push(e);
            }
        }
        Ok(CandidateIndex {
            model,
            entries: kept,
            parts: Vec::new(),
        })
    }

    pub fn with_parts(mut self, parts: &[Part]) -> Self {
        self.parts = parts.to_vec();
        self
    }

    /// Split parts the candidates were drawn from.
    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn model(&self) -> &'m EmbeddingModel {
        self.model
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.iter().any(|e| e.token.text() == text)
    }

    /// Composes `observed` and returns its top-k neighbours.
    pub fn recommend<S: AsRef<str>>(&self, observed: &[S], k: usize) -> Result<RecommendationList, RecError> {
        let query = SeqToken::from_items(observed)?;
        let vector = self.model.compose(&query)?;
        self.recommend_vector(query, &vector, k)
    }

    /// Top-k entries by cosine to `vector`, skipping the entry whose text
    /// equals the query's. Ties are ordered by token text.
    pub fn recommend_vector(&self, query: SeqToken, vector: &[f32], k: usize) -> Result<RecommendationList, RecError> {
        if k == 0 {
            return Err(RecError::ZeroK);
        }
        let mut scored: Vec<(f64, &IndexEntry)> = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            if e.token.text() == query.text() {
                continue;
            }
            scored.push((embed::similarity(vector, &e.vector)?, e));
        }
        let order = |a: &(f64, &IndexEntry), b: &(f64, &IndexEntry)| -> Ordering {
            b.0.total_cmp(&a.0).then_with(|| a.1.token.text().cmp(b.1.token.text()))
        };
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        let ranked = scored
            .into_iter()
            .map(|(score, e)| ScoredSequence {
                items: e.token.items().to_vec(),
                score,
                text: e.token.text().to_owned(),
            })
            .collect();
        Ok(RecommendationList { query, ranked })
    }
}

pub fn build_index<'m, 's, I>(model: &'m EmbeddingModel, candidates: I) -> Result<CandidateIndex<'m>, RecError>
where
    I: IntoIterator<Item = &'s Sequence>,
{
    CandidateIndex::build(model, candidates)
}

pub fn recommend(index: &CandidateIndex<'_>, observed: &Sequence, k: usize) -> Result<RecommendationList, RecError> {
    index.recommend(&observed.items, k)
}

/// Recommendations for many users, keyed by user and then by the observed
/// sequence's `seq_index`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchRecommendations {
    pub by_user: BTreeMap<String, Vec<(usize, RecommendationList)>>,
    /// Users that had no observed sequence.
    pub omitted_users: usize,
    /// Lists that came back empty.
    pub empty_lists: usize,
}

pub fn recommend_batch(
    index: &CandidateIndex<'_>,
    observed: &[UserProfile],
    k: usize,
) -> Result<BatchRecommendations, RecError> {
    let mut out = BatchRecommendations::default();
    for profile in observed {
        if profile.sequences.is_empty() {
            out.omitted_users += 1;
            continue;
        }
        let mut seqs: Vec<&Sequence> = profile.sequences.iter().collect();
        seqs.sort_by_key(|s| s.seq_index);
        let mut lists = Vec::with_capacity(seqs.len());
        for seq in seqs {
            let list = recommend(index, seq, k)?;
            out.empty_lists += usize::from(list.is_empty());
            lists.push((seq.seq_index, list));
        }
        out.by_user.insert(profile.user_id.clone(), lists);
    }
    Ok(out)
}

/// Cache of composed vectors keyed by token text, for callers that score
/// the same sequences repeatedly.
#[derive(Debug, Default)]
pub struct VectorCache {
    vectors: HashMap<String, Vec<f32>>,
}

impl VectorCache {
    pub fn get_or_compose(&mut self, model: &EmbeddingModel, token: &SeqToken) -> Result<&[f32], EmbedError> {
        if !self.vectors.contains_key(token.text()) {
            let v = model.compose(token)?;
            self.vectors.insert(token.text().to_owned(), v);
        }
        Ok(&self.vectors[token.text()])
    }
}
