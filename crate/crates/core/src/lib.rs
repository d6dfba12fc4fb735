//! Sequence recommendation with subsequence-gram embeddings.
//!
//! User interactions are grouped into sequences (trips, playlists, sessions).
//! Each sequence is treated like a word whose "characters" are items, so a
//! subword embedding model can be trained over item n-grams. Recommended
//! lists of sequences are evaluated with ROUGE-N and ROUGE-L.
//!
//! Modules, bottom-up:
//!
//! * [`corpus`]: log parsing, sessionization and A/B/C/D splits.
//! * [`subseq`]: canonical sequence tokens, item n-grams and bucket hashing.
//! * [`embed`]: skip-gram / CBOW negative-sampling trainer and composition.
//! * [`recindex`]: brute-force cosine top-k over candidate sequences.
//! * [`rouge`]: ROUGE-N, ROUGE-L and the reluctant/strict baselines.
//! * [`harness`]: evaluation configurations, sweeps and reports.

pub mod corpus;
pub mod embed;
pub mod harness;
pub mod recindex;
pub mod rouge;
pub mod subseq;
