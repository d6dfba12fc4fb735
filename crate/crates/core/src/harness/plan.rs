//! Candidate pools and per-user queries for one configuration.

use std::collections::{BTreeMap, HashSet};

use super::{ConfigType, HarnessError};
use crate::corpus::{EvalSplit, Part, Sequence};
use crate::embed::EmbeddingModel;
use crate::recindex::CandidateIndex;
use crate::subseq;

/// A held-out sequence a user's recommendations are judged against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reference {
    pub seq_index: usize,
    pub items: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserQuery {
    pub user_id: String,
    pub query: Vec<String>,
    /// `seq_index` of the sequence the query was taken from.
    pub query_seq_index: usize,
    /// True when the user had no training-part sequence and the query is a
    /// prefix of their first test sequence.
    pub cold_start: bool,
    /// Prefix length removed from the reference at `query_seq_index`.
    pub prefix_len: Option<usize>,
    pub references: Vec<Reference>,
}

/// Everything a run needs besides the model: the leak-free candidate pool
/// and the query for each evaluated user.
#[derive(Clone, Debug)]
pub struct RunPlan<'s> {
    pub config_type: ConfigType,
    pub candidates: Vec<&'s Sequence>,
    /// Token texts of every test-part sequence; none may enter the index.
    pub forbidden: HashSet<String>,
    /// Training-part sequences dropped because their text is also a test
    /// sequence.
    pub leak_filtered: usize,
    pub queries: Vec<UserQuery>,
    /// Users with test sequences but nothing left to score.
    pub skipped_users: usize,
}

/// Number of leading items used as a cold-start query.
pub fn prefix_len(len: usize, fraction: f64) -> usize {
    ((len as f64 * fraction).floor() as usize).clamp(1, len.max(1))
}

fn part_sequences<'s>(split: &'s EvalSplit, parts: &[Part]) -> Vec<&'s Sequence> {
    parts.iter().flat_map(|&p| split.sequences(p)).collect()
}

fn by_user<'s>(seqs: &[&'s Sequence]) -> BTreeMap<&'s str, Vec<&'s Sequence>> {
    let mut map: BTreeMap<&str, Vec<&Sequence>> = BTreeMap::new();
    for &s in seqs {
        map.entry(s.user_id.as_str()).or_default().push(s);
    }
    for list in map.values_mut() {
        list.sort_by_key(|s| s.seq_index);
        // A user whose only second-half sequence is both B and D shows up
        // twice when both parts are held out.
        list.dedup_by_key(|s| s.seq_index);
    }
    map
}

impl<'s> RunPlan<'s> {
    pub fn new(split: &'s EvalSplit, config_type: ConfigType, query_prefix_fraction: f64) -> Result<Self, HarnessError> {
        let train = part_sequences(split, config_type.train_parts());
        let test = part_sequences(split, config_type.test_parts());
        if split.part_a.is_empty() {
            return Err(HarnessError::EmptyParts(config_type, "A".into()));
        }
        if train.is_empty() || test.is_empty() {
            let which = if train.is_empty() { config_type.train_parts() } else { config_type.test_parts() };
            let names: Vec<&str> = which.iter().map(|p| p.label()).collect();
            return Err(HarnessError::EmptyParts(config_type, names.join(",")));
        }

        let forbidden: HashSet<String> = test.iter().map(|s| subseq::serialize(s).text().to_owned()).collect();
        let mut candidates = Vec::with_capacity(train.len());
        let mut leak_filtered = 0;
        for &s in &train {
            if forbidden.contains(subseq::serialize(s).text()) {
                leak_filtered += 1;
            } else {
                candidates.push(s);
            }
        }

        let train_by_user = by_user(&train);
        let mut queries = Vec::new();
        let mut skipped_users = 0;
        for (user, tests) in by_user(&test) {
            let held_out: HashSet<usize> = tests.iter().map(|s| s.seq_index).collect();
            let observed = train_by_user
                .get(user)
                .and_then(|seqs| seqs.iter().rev().find(|s| !held_out.contains(&s.seq_index)));
            let mut references: Vec<Reference> = tests
                .iter()
                .map(|s| Reference {
                    seq_index: s.seq_index,
                    items: s.items.clone(),
                })
                .collect();
            let query = match observed {
                Some(seq) => UserQuery {
                    user_id: user.to_owned(),
                    query: seq.items.clone(),
                    query_seq_index: seq.seq_index,
                    cold_start: false,
                    prefix_len: None,
                    references,
                },
                None => {
                    let first = &mut references[0];
                    let cut = prefix_len(first.items.len(), query_prefix_fraction);
                    let query: Vec<String> = first.items.drain(..cut).collect();
                    let query_seq_index = first.seq_index;
                    references.retain(|r| !r.items.is_empty());
                    UserQuery {
                        user_id: user.to_owned(),
                        query,
                        query_seq_index,
                        cold_start: true,
                        prefix_len: Some(cut),
                        references,
                    }
                }
            };
            if query.references.is_empty() {
                skipped_users += 1;
            } else {
                queries.push(query);
            }
        }
        Ok(RunPlan {
            config_type,
            candidates,
            forbidden,
            leak_filtered,
            queries,
            skipped_users,
        })
    }

    /// Builds the index, failing if any candidate is a test sequence.
    pub fn build_index<'m>(&self, model: &'m EmbeddingModel) -> Result<CandidateIndex<'m>, HarnessError> {
        let index = CandidateIndex::build_guarded(model, self.candidates.iter().copied(), &self.forbidden)?;
        Ok(index.with_parts(self.config_type.train_parts()))
    }

    /// Distinct token texts in the candidate pool.
    pub fn pool_texts(&self) -> HashSet<String> {
        self.candidates.iter().map(|s| subseq::serialize(s).text().to_owned()).collect()
    }

    pub fn cold_start_users(&self) -> usize {
        self.queries.iter().filter(|q| q.cold_start).count()
    }
}
