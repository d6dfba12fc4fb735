//! The token layer: sequences as "words", item n-grams as "character n-grams".
//!
//! A [`SeqToken`] is the canonical string form of an item list, used as the
//! vocabulary key. [`extract_ngrams`] decomposes an item list into ordered
//! contiguous sub-sequences, optionally padded with begin/end pseudo-items,
//! and [`gram_bucket`] maps each gram to a hashed embedding row.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sequence;

/// Joins item ids inside a serialized token or gram.
pub const SEPARATOR: char = '\u{1F}';
/// Begin-of-sequence pseudo-item.
pub const BOS: &str = "\u{02}";
/// End-of-sequence pseudo-item.
pub const EOS: &str = "\u{03}";

const RESERVED: [char; 3] = [SEPARATOR, '\u{02}', '\u{03}'];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubseqError {
    #[error("empty item id")]
    EmptyItemId,
    #[error("item id {0:?} contains a reserved character")]
    ReservedChar(String),
    #[error("a sequence needs at least one item")]
    EmptySequence,
    #[error("invalid n-gram range: min_n={min_n}, max_n={max_n}")]
    InvalidRange { min_n: usize, max_n: usize },
}

/// Rejects ids that are empty or that contain the separator or a boundary marker.
pub fn validate_item_id(id: &str) -> Result<(), SubseqError> {
    if id.is_empty() {
        return Err(SubseqError::EmptyItemId);
    }
    if id.contains(RESERVED) {
        return Err(SubseqError::ReservedChar(id.to_owned()));
    }
    Ok(())
}

/// Canonical token for an ordered item list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeqToken {
    text: String,
    items: Vec<String>,
}

impl SeqToken {
    pub fn from_items<S: AsRef<str>>(items: &[S]) -> Result<Self, SubseqError> {
        if items.is_empty() {
            return Err(SubseqError::EmptySequence);
        }
        for item in items {
            validate_item_id(item.as_ref())?;
        }
        Ok(Self::from_validated(items))
    }

    fn from_validated<S: AsRef<str>>(items: &[S]) -> Self {
        let items: Vec<String> = items.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut text = String::with_capacity(items.iter().map(|s| s.len() + 1).sum());
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                text.push(SEPARATOR);
            }
            text.push_str(item);
        }
        SeqToken { text, items }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl fmt::Display for SeqToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.items.join(", "))
    }
}

/// Serializes a sequence whose ids were validated at ingestion.
pub fn serialize(seq: &Sequence) -> SeqToken {
    debug_assert!(!seq.items.is_empty());
    debug_assert!(seq.items.iter().all(|i| validate_item_id(i).is_ok()));
    SeqToken::from_validated(&seq.items)
}

pub fn deserialize(text: &str) -> Result<SeqToken, SubseqError> {
    let items: Vec<&str> = text.split(SEPARATOR).collect();
    SeqToken::from_items(&items)
}

/// Inclusive gram-length range and boundary padding switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRange {
    pub min_n: usize,
    pub max_n: usize,
    pub with_boundaries: bool,
}

impl NgramRange {
    pub fn new(min_n: usize, max_n: usize, with_boundaries: bool) -> Result<Self, SubseqError> {
        let range = NgramRange {
            min_n,
            max_n,
            with_boundaries,
        };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<(), SubseqError> {
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(SubseqError::InvalidRange {
                min_n: self.min_n,
                max_n: self.max_n,
            });
        }
        Ok(())
    }

    /// Number of grams an item list of `len` items decomposes into.
    pub fn gram_count(&self, len: usize) -> usize {
        let padded = if self.with_boundaries { len + 2 } else { len };
        (self.min_n..=self.max_n.min(padded))
            .map(|n| padded + 1 - n)
            .sum()
    }
}

impl Default for NgramRange {
    fn default() -> Self {
        NgramRange {
            min_n: 1,
            max_n: 5,
            with_boundaries: true,
        }
    }
}

/// An ordered contiguous slice of a (possibly padded) item list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubseqGram {
    items: Vec<String>,
}

impl SubseqGram {
    pub fn new(items: Vec<String>) -> Self {
        SubseqGram { items }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    /// Items joined with [`SEPARATOR`]; this is what gets hashed.
    pub fn serialized(&self) -> String {
        let mut out = String::new();
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                out.push(SEPARATOR);
            }
            out.push_str(item);
        }
        out
    }
}

/// Space-joined items with the markers rendered as `<` and `>`.
impl fmt::Display for SubseqGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match item.as_str() {
                BOS => f.write_str("<")?,
                EOS => f.write_str(">")?,
                other => f.write_str(other)?,
            }
        }
        Ok(())
    }
}

fn padded<'a, S: AsRef<str>>(items: &'a [S], with_boundaries: bool) -> Vec<&'a str> {
    let mut out = Vec::with_capacity(items.len() + 2);
    if with_boundaries {
        out.push(BOS);
    }
    out.extend(items.iter().map(|s| s.as_ref()));
    if with_boundaries {
        out.push(EOS);
    }
    out
}

fn for_each_gram<S: AsRef<str>>(items: &[S], range: NgramRange, mut f: impl FnMut(&[&str])) {
    let padded = padded(items, range.with_boundaries);
    for start in 0..padded.len() {
        for n in range.min_n..=range.max_n {
            let end = start + n;
            if end > padded.len() {
                break;
            }
            f(&padded[start..end]);
        }
    }
}

/// All contiguous grams with `min_n <= n <= max_n`, ordered by start position
/// and then by increasing length. Duplicates are kept.
pub fn extract_ngrams<S: AsRef<str>>(items: &[S], range: NgramRange) -> Vec<SubseqGram> {
    let mut grams = Vec::with_capacity(range.gram_count(items.len()));
    for_each_gram(items, range, |slice| {
        grams.push(SubseqGram::new(slice.iter().map(|s| (*s).to_owned()).collect()))
    });
    grams
}

const FNV_OFFSET: u32 = 2_166_136_261;
const FNV_PRIME: u32 = 16_777_619;

fn fnv1a_update(mut hash: u32, bytes: &[u8]) -> u32 {
    for &b in bytes {
        hash ^= u32::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// 32-bit FNV-1a.
pub fn fnv1a32(bytes: &[u8]) -> u32 {
    fnv1a_update(FNV_OFFSET, bytes)
}

fn hash_slice(slice: &[&str]) -> u32 {
    let mut sep = [0u8; 4];
    let sep = SEPARATOR.encode_utf8(&mut sep).as_bytes();
    let mut hash = FNV_OFFSET;
    for (i, item) in slice.iter().enumerate() {
        if i > 0 {
            hash = fnv1a_update(hash, sep);
        }
        hash = fnv1a_update(hash, item.as_bytes());
    }
    hash
}

/// Bucket of a gram: FNV-1a of its serialized form modulo `bucket_count`.
///
/// Panics if `bucket_count` is zero.
pub fn gram_bucket(gram: &SubseqGram, bucket_count: u32) -> u32 {
    assert!(bucket_count >= 1, "bucket_count must be at least 1");
    fnv1a32(gram.serialized().as_bytes()) % bucket_count
}

/// Buckets of every gram of `items`, in [`extract_ngrams`] order, without
/// materializing the grams.
pub fn gram_buckets<S: AsRef<str>>(items: &[S], range: NgramRange, bucket_count: u32) -> Vec<u32> {
    assert!(bucket_count >= 1, "bucket_count must be at least 1");
    let mut out = Vec::with_capacity(range.gram_count(items.len()));
    for_each_gram(items, range, |slice| out.push(hash_slice(slice) % bucket_count));
    out
}

/// True for the one-item grams made of a lone boundary marker. They occur in
/// every padded sequence and carry no information about its items.
pub fn is_boundary_unigram(slice: &[&str]) -> bool {
    matches!(slice, [only] if *only == BOS || *only == EOS)
}

/// Buckets of the grams a sequence embedding is composed from: the
/// [`gram_buckets`] list without lone boundary markers.
pub fn subword_buckets<S: AsRef<str>>(items: &[S], range: NgramRange, bucket_count: u32) -> Vec<u32> {
    assert!(bucket_count >= 1, "bucket_count must be at least 1");
    let mut out = Vec::with_capacity(range.gram_count(items.len()));
    for_each_gram(items, range, |slice| {
        if !is_boundary_unigram(slice) {
            out.push(hash_slice(slice) % bucket_count);
        }
    });
    out
}
