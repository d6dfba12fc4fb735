//! Evaluation configurations and the flat `key = value` config format.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::{Part, DEFAULT_BOUNDARY, DEFAULT_GAP_SECONDS};
use crate::embed::{Hyperparams, TrainMode};
use crate::recindex::{DEFAULT_K, DEFAULT_NEIGHBORS};

/// Which split parts feed the candidate pool and which are held out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfigType {
    I,
    II,
    III,
    IV,
    V,
}

impl ConfigType {
    pub const ALL: [ConfigType; 5] = [ConfigType::I, ConfigType::II, ConfigType::III, ConfigType::IV, ConfigType::V];

    pub fn train_parts(self) -> &'static [Part] {
        match self {
            ConfigType::I => &[Part::A],
            ConfigType::II => &[Part::A, Part::B],
            ConfigType::III => &[Part::A, Part::B, Part::C],
            ConfigType::IV => &[Part::B],
            ConfigType::V => &[Part::B, Part::C],
        }
    }

    pub fn test_parts(self) -> &'static [Part] {
        match self {
            ConfigType::I => &[Part::B, Part::C, Part::D],
            ConfigType::II | ConfigType::IV => &[Part::C, Part::D],
            ConfigType::III | ConfigType::V => &[Part::D],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConfigType::I => "I",
            ConfigType::II => "II",
            ConfigType::III => "III",
            ConfigType::IV => "IV",
            ConfigType::V => "V",
        }
    }
}

impl fmt::Display for ConfigType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ConfigType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ConfigType::I),
            "II" | "2" => Ok(ConfigType::II),
            "III" | "3" => Ok(ConfigType::III),
            "IV" | "4" => Ok(ConfigType::IV),
            "V" | "5" => Ok(ConfigType::V),
            _ => Err(format!("unknown configuration type {s:?} (expected I..V)")),
        }
    }
}

/// How per-list scores are averaged into a run summary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Mean over users; each user is scored against all of their references.
    #[default]
    Macro,
    /// Mean over reference sequences; each is scored on its own.
    Micro,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Macro => "macro",
            Aggregation::Micro => "micro",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(Aggregation::Macro),
            "micro" => Ok(Aggregation::Micro),
            other => Err(format!("unknown aggregation {other:?}")),
        }
    }
}

pub const DEFAULT_QUERY_PREFIX_FRACTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub config_type: ConfigType,
    pub hp: Hyperparams,
    /// Length of each recommendation list.
    pub k: usize,
    /// Neighbour count; kept for the record, the full scan ignores it.
    pub neighbors: usize,
    pub gap_seconds: i64,
    pub boundary: f64,
    /// Share of a cold-start user's first test sequence used as the query.
    pub query_prefix_fraction: f64,
    pub aggregation: Aggregation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            config_type: ConfigType::I,
            hp: Hyperparams::default(),
            k: DEFAULT_K,
            neighbors: DEFAULT_NEIGHBORS,
            gap_seconds: DEFAULT_GAP_SECONDS,
            boundary: DEFAULT_BOUNDARY,
            query_prefix_fraction: DEFAULT_QUERY_PREFIX_FRACTION,
            aggregation: Aggregation::Macro,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| HarnessError::InvalidValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(HarnessError::InvalidValue {
            key: key.to_owned(),
            value: value.to_owned(),
            reason: "expected a boolean".into(),
        }),
    }
}

impl EvalConfig {
    /// Every key accepted by [`set`](Self::set), in file order.
    pub const KEYS: [&'static str; 21] = [
        "config_type",
        "mode",
        "dim",
        "min_n",
        "max_n",
        "with_boundaries",
        "window",
        "negatives",
        "epochs",
        "lr",
        "seed",
        "bucket_count",
        "min_count",
        "subsample",
        "threads",
        "k",
        "neighbors",
        "gap_seconds",
        "boundary",
        "query_prefix_fraction",
        "aggregation",
    ];

    /// Sets one field from its textual form. Range checks are left to
    /// [`validate`](Self::validate).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        let hp = &mut self.hp;
        match key {
            "config_type" => self.config_type = parse(key, value)?,
            "mode" => hp.mode = parse::<TrainMode>(key, value)?,
            "dim" => hp.dim = parse(key, value)?,
            "min_n" => hp.ngrams.min_n = parse(key, value)?,
            "max_n" => hp.ngrams.max_n = parse(key, value)?,
            "with_boundaries" => hp.ngrams.with_boundaries = parse_bool(key, value)?,
            "window" => hp.window = parse(key, value)?,
            "negatives" => hp.negatives = parse(key, value)?,
            "epochs" => hp.epochs = parse(key, value)?,
            "lr" => hp.lr = parse(key, value)?,
            "seed" => hp.seed = parse(key, value)?,
            "bucket_count" => hp.bucket_count = parse(key, value)?,
            "min_count" => hp.min_count = parse(key, value)?,
            "subsample" => {
                hp.subsample = match value {
                    "" | "none" | "off" | "0" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "threads" => hp.threads = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "neighbors" => self.neighbors = parse(key, value)?,
            "gap_seconds" => self.gap_seconds = parse(key, value)?,
            "boundary" => self.boundary = parse(key, value)?,
            "query_prefix_fraction" => self.query_prefix_fraction = parse(key, value)?,
            "aggregation" => self.aggregation = parse(key, value)?,
            other => return Err(HarnessError::UnknownKey(other.to_owned())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let hp = &self.hp;
        Some(match key {
            "config_type" => self.config_type.to_string(),
            "mode" => hp.mode.to_string(),
            "dim" => hp.dim.to_string(),
            "min_n" => hp.ngrams.min_n.to_string(),
            "max_n" => hp.ngrams.max_n.to_string(),
            "with_boundaries" => hp.ngrams.with_boundaries.to_string(),
            "window" => hp.window.to_string(),
            "negatives" => hp.negatives.to_string(),
            "epochs" => hp.epochs.to_string(),
            "lr" => hp.lr.to_string(),
            "seed" => hp.seed.to_string(),
            "bucket_count" => hp.bucket_count.to_string(),
            "min_count" => hp.min_count.to_string(),
            "subsample" => hp.subsample.map_or_else(|| "none".to_owned(), |t| t.to_string()),
            "threads" => hp.threads.to_string(),
            "k" => self.k.to_string(),
            "neighbors" => self.neighbors.to_string(),
            "gap_seconds" => self.gap_seconds.to_string(),
            "boundary" => self.boundary.to_string(),
            "query_prefix_fraction" => self.query_prefix_fraction.to_string(),
            "aggregation" => self.aggregation.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored; later keys override earlier ones.
    pub fn apply_str(&mut self, text: &str) -> Result<(), HarnessError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Syntax {
                line: no + 1,
                text: raw.to_owned(),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = EvalConfig::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse_str(&text)
    }

    /// All keys as `key = value` lines; [`parse_str`](Self::parse_str) reads
    /// it back to an equal config.
    pub fn to_kv_string(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.hp.validate()?;
        let invalid = |key: &str, reason: &str| {
            Err(HarnessError::InvalidValue {
                key: key.to_owned(),
                value: self.get(key).unwrap_or_default(),
                reason: reason.to_owned(),
            })
        };
        if self.k == 0 {
            return invalid("k", "must be at least 1");
        }
        if self.neighbors == 0 {
            return invalid("neighbors", "must be at least 1");
        }
        if self.gap_seconds <= 0 {
            return invalid("gap_seconds", "must be positive");
        }
        if !(self.boundary > 0.0 && self.boundary < 1.0) {
            return invalid("boundary", "must lie strictly between 0 and 1");
        }
        if !(self.query_prefix_fraction > 0.0 && self.query_prefix_fraction < 1.0) {
            return invalid("query_prefix_fraction", "must lie strictly between 0 and 1");
        }
        Ok(())
    }
}
