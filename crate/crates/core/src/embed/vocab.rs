use std::collections::HashMap;

use rand::Rng;

use super::EmbedError;
use crate::corpus::UserProfile;
use crate::subseq::{self, SeqToken};

/// Per-user sentences of sequence tokens, each in `seq_index` order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrainingCorpus {
    pub sentences: Vec<Vec<SeqToken>>,
}

impl TrainingCorpus {
    pub fn from_profiles<'a, I>(profiles: I) -> Self
    where
        I: IntoIterator<Item = &'a UserProfile>,
    {
        let sentences = profiles
            .into_iter()
            .map(|p| {
                let mut seqs: Vec<_> = p.sequences.iter().collect();
                seqs.sort_by_key(|s| s.seq_index);
                seqs.into_iter().map(subseq::serialize).collect::<Vec<_>>()
            })
            .filter(|s: &Vec<SeqToken>| !s.is_empty())
            .collect();
        TrainingCorpus { sentences }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.token_count() == 0
    }
}

/// Draws token indices with probability proportional to `count^0.75`.
#[derive(Clone, Debug, PartialEq)]
pub struct NegativeSampler {
    cdf: Vec<f64>,
}

impl NegativeSampler {
    pub const POWER: f64 = 0.75;

    pub fn new(counts: &[u64]) -> Self {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(Self::POWER)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc / total
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        NegativeSampler { cdf }
    }

    /// Normalized probability of drawing token `idx`.
    pub fn probability(&self, idx: usize) -> f64 {
        let prev = if idx == 0 { 0.0 } else { self.cdf[idx - 1] };
        self.cdf[idx] - prev
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }
}

/// Training vocabulary, ordered by descending frequency then token text.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    tokens: Vec<SeqToken>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
    sampler: NegativeSampler,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens && self.counts == other.counts && self.min_count == other.min_count
    }
}

impl Vocabulary {
    pub(crate) fn from_parts(tokens: Vec<SeqToken>, counts: Vec<u64>, min_count: u64) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.text().to_owned(), i))
            .collect();
        let sampler = NegativeSampler::new(&counts);
        Vocabulary {
            tokens,
            counts,
            index,
            min_count,
            sampler,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, text: &str) -> Option<usize> {
        self.index.get(text).copied()
    }

    pub fn token(&self, idx: usize) -> &SeqToken {
        &self.tokens[idx]
    }

    pub fn tokens(&self) -> &[SeqToken] {
        &self.tokens
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn sampler(&self) -> &NegativeSampler {
        &self.sampler
    }
}

pub fn build_vocab(corpus: &TrainingCorpus, min_count: u64) -> Result<Vocabulary, EmbedError> {
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, (u64, &SeqToken)> = HashMap::new();
    for token in corpus.sentences.iter().flatten() {
        counts.entry(token.text()).or_insert((0, token)).0 += 1;
    }
    let distinct = counts.len();
    let mut kept: Vec<(u64, &SeqToken)> = counts.into_values().filter(|(c, _)| *c >= min_count).collect();
    if kept.is_empty() {
        return Err(EmbedError::EmptyVocabulary {
            min_count,
            distinct,
        });
    }
    kept.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.text().cmp(b.1.text())));
    let (counts, tokens): (Vec<u64>, Vec<SeqToken>) =
        kept.into_iter().map(|(c, t)| (c, t.clone())).unzip();
    Ok(Vocabulary::from_parts(tokens, counts, min_count))
}
