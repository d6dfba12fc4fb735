//! Seeded synthetic interaction logs with topical users and late arrivals.
//!
//! Every item belongs to one topic and every user has a home topic. Sessions
//! walk along their topic's item chain, so neighbouring items recur as
//! n-grams. Cold-start users only appear in the second half of the time range,
//! and some topics are used by cold-start users alone.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Interaction;

const DAY: i64 = 86_400;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    /// Total topic count, including the exclusive ones.
    pub topics: usize,
    /// Topics only cold-start users interact with.
    pub exclusive_topics: usize,
    pub items_per_topic: usize,
    pub cold_start_fraction: f64,
    /// Share of cold-start users whose home topic is exclusive.
    pub exclusive_share: f64,
    pub warm_sessions: (usize, usize),
    pub cold_sessions: (usize, usize),
    pub session_len: (usize, usize),
    /// Probability that a session visits a random shared topic instead of the
    /// home topic.
    pub topic_drift: f64,
    /// Per-item probability of a random shared-topic item.
    pub noise: f64,
    pub days: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            users: 600,
            topics: 24,
            exclusive_topics: 4,
            items_per_topic: 12,
            cold_start_fraction: 0.35,
            exclusive_share: 0.6,
            warm_sessions: (8, 14),
            cold_sessions: (3, 6),
            session_len: (3, 6),
            topic_drift: 0.1,
            noise: 0.05,
            days: 120,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub interactions: Vec<Interaction>,
    pub item_topic: BTreeMap<String, usize>,
    pub user_topic: BTreeMap<String, usize>,
    pub cold_start_users: BTreeSet<String>,
    pub exclusive_topics: BTreeSet<usize>,
}

impl SyntheticCorpus {
    /// The topic holding a strict majority of `items`, if any.
    pub fn majority_topic<S: AsRef<str>>(&self, items: &[S]) -> Option<usize> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for it in items {
            if let Some(&t) = self.item_topic.get(it.as_ref()) {
                *counts.entry(t).or_default() += 1;
            }
        }
        counts.into_iter().find(|&(_, c)| 2 * c > items.len()).map(|(t, _)| t)
    }
}

fn item_name(topic: usize, idx: usize) -> String {
    format!("t{topic:02}_i{idx:02}")
}

fn range<R: Rng>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi.max(lo))
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticCorpus {
    assert!(spec.topics > spec.exclusive_topics, "need at least one shared topic");
    assert!(spec.items_per_topic >= 2 && spec.days >= 4 && spec.session_len.0 >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared = spec.topics - spec.exclusive_topics;
    let mut corpus = SyntheticCorpus {
        interactions: Vec::new(),
        item_topic: BTreeMap::new(),
        user_topic: BTreeMap::new(),
        cold_start_users: BTreeSet::new(),
        exclusive_topics: (shared..spec.topics).collect(),
    };
    for t in 0..spec.topics {
        for i in 0..spec.items_per_topic {
            corpus.item_topic.insert(item_name(t, i), t);
        }
    }
    let half = spec.days / 2 + 1;
    let n_cold = (spec.users as f64 * spec.cold_start_fraction).round() as usize;
    for u in 0..spec.users {
        let user = format!("u{u:04}");
        let cold = u >= spec.users - n_cold;
        let home = if cold && spec.exclusive_topics > 0 && rng.gen_bool(spec.exclusive_share) {
            rng.gen_range(shared..spec.topics)
        } else {
            rng.gen_range(0..shared)
        };
        let (first_day, sessions) = if cold {
            (half, range(&mut rng, spec.cold_sessions))
        } else {
            (0, range(&mut rng, spec.warm_sessions))
        };
        let span = spec.days - first_day;
        let mut days = index::sample(&mut rng, span, sessions.min(span)).into_vec();
        days.sort_unstable();
        for day in days {
            let topic = if rng.gen_bool(spec.topic_drift) { rng.gen_range(0..shared) } else { home };
            let len = range(&mut rng, spec.session_len);
            let mut pos = rng.gen_range(0..spec.items_per_topic);
            let mut t = (first_day + day) as i64 * DAY + rng.gen_range(8..12) * 3600;
            for _ in 0..len {
                let item = if rng.gen_bool(spec.noise) {
                    item_name(rng.gen_range(0..shared), rng.gen_range(0..spec.items_per_topic))
                } else {
                    item_name(topic, pos)
                };
                corpus.interactions.push(Interaction {
                    user_id: user.clone(),
                    item_id: item,
                    timestamp: t,
                    session_id: None,
                });
                pos = (pos + if rng.gen_bool(0.8) { 1 } else { 2 }) % spec.items_per_topic;
                t += rng.gen_range(60..600);
            }
        }
        corpus.user_topic.insert(user.clone(), home);
        if cold {
            corpus.cold_start_users.insert(user);
        }
    }
    corpus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_sequences, make_split, DEFAULT_GAP_SECONDS};

    #[test]
    fn seeded_and_shaped() {
        let spec = SyntheticSpec::default();
        let a = generate(&spec);
        assert_eq!(a, generate(&spec));
        assert_ne!(a.interactions, generate(&SyntheticSpec { seed: 8, ..spec.clone() }).interactions);
        assert_eq!(a.user_topic.len(), 600);
        assert_eq!(a.cold_start_users.len(), 210);
        let topics: BTreeSet<usize> = a.item_topic.values().copied().collect();
        assert_eq!(topics.len(), 24);
    }

    #[test]
    fn sessions_follow_gap_rule_and_cold_users_are_late() {
        let spec = SyntheticSpec::default();
        let c = generate(&spec);
        let profiles = build_sequences(&c.interactions, DEFAULT_GAP_SECONDS).unwrap();
        let n_sessions: usize = profiles.iter().map(|p| p.sequences.len()).sum();
        let lens: Vec<usize> = profiles.iter().flat_map(|p| p.sequences.iter().map(|s| s.len())).collect();
        assert!(lens.iter().all(|&l| (3..=6).contains(&l)), "sessions merged or split");
        assert!(n_sessions > 4000);

        let split = make_split(&profiles, 0.5).unwrap();
        for p in &split.part_a {
            assert!(!c.cold_start_users.contains(&p.user_id));
            for s in &p.sequences {
                let topic = c.majority_topic(&s.items);
                assert!(topic.map_or(true, |t| !c.exclusive_topics.contains(&t)));
            }
        }
    }

    #[test]
    fn majority_topic() {
        let c = generate(&SyntheticSpec {
            users: 10,
            ..SyntheticSpec::default()
        });
        assert_eq!(c.majority_topic(&["t03_i00", "t03_i01", "t05_i00"]), Some(3));
        assert_eq!(c.majority_topic(&["t03_i00", "t05_i00"]), None);
    }
}
