//! Interaction logs, per-user sequences and the A/B/C/D evaluation split.
//!
//! Logs are tab-separated `user_id  item_id  timestamp  [session_id]` rows.
//! Events are grouped into [`Sequence`]s either by session id or by a time-gap
//! cut, and [`make_split`] cuts the global time range into a first part (A)
//! and a second part that is further divided per user into B (first
//! sequence), C (middle sequences) and D (last sequence).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::subseq::validate_item_id;

/// Default sessionization gap: 8 hours.
pub const DEFAULT_GAP_SECONDS: i64 = 28_800;
/// Default position of the A / second-half cut within the global time range.
pub const DEFAULT_BOUNDARY: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("I/O error: {0}")]
    Stream(#[from] io::Error),
    #[error("gap_seconds must be positive, got {0}")]
    InvalidGap(i64),
    #[error("split boundary must lie strictly between 0 and 1, got {0}")]
    InvalidBoundary(f64),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("unknown log format {0:?} (expected tsv_events or tsv_sessions)")]
    UnknownFormat(String),
    #[error("{path}:{line}: {message}")]
    MalformedSplit {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// One user/item/time event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: i64,
    pub session_id: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogFormat {
    /// `user item timestamp`; a fourth column, if present, is ignored and
    /// sequences are cut by time gap.
    TsvEvents,
    /// `user item timestamp session`; the session column is required.
    TsvSessions,
}

impl FromStr for LogFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv_events" => Ok(LogFormat::TsvEvents),
            "tsv_sessions" => Ok(LogFormat::TsvSessions),
            other => Err(CorpusError::UnknownFormat(other.to_owned())),
        }
    }
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogFormat::TsvEvents => "tsv_events",
            LogFormat::TsvSessions => "tsv_sessions",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedLog {
    pub interactions: Vec<Interaction>,
    pub skipped: usize,
}

pub fn parse_log(path: impl AsRef<Path>, format: LogFormat) -> Result<ParsedLog, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_reader(BufReader::new(file), format)
}

/// Parses rows from any reader. Blank and `#` lines are ignored; malformed
/// rows are skipped and counted.
pub fn parse_reader<R: BufRead>(reader: R, format: LogFormat) -> Result<ParsedLog, CorpusError> {
    let mut parsed = ParsedLog::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_row(line, format) {
            Some(interaction) => parsed.interactions.push(interaction),
            None => parsed.skipped += 1,
        }
    }
    if parsed.skipped > 0 {
        log::warn!("skipped {} malformed rows", parsed.skipped);
    }
    Ok(parsed)
}

fn parse_row(line: &str, format: LogFormat) -> Option<Interaction> {
    let fields: Vec<&str> = line.split('\t').collect();
    let session_id = match (format, fields.len()) {
        (LogFormat::TsvEvents, 3 | 4) => None,
        (LogFormat::TsvSessions, 4) if !fields[3].is_empty() => Some(fields[3].to_owned()),
        _ => return None,
    };
    let (user_id, item_id) = (fields[0], fields[1]);
    if user_id.is_empty() || validate_item_id(item_id).is_err() {
        return None;
    }
    let timestamp: i64 = fields[2].trim().parse().ok()?;
    if timestamp < 0 {
        return None;
    }
    Some(Interaction {
        user_id: user_id.to_owned(),
        item_id: item_id.to_owned(),
        timestamp,
        session_id,
    })
}

/// A user's ordered run of items (a trip, playlist or session).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence {
    pub user_id: String,
    pub items: Vec<String>,
    /// Timestamp of each item, parallel to `items`.
    pub timestamps: Vec<i64>,
    pub start_time: i64,
    /// Position of this sequence within the user's full history.
    pub seq_index: usize,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub sequences: Vec<Sequence>,
}

/// Groups events into per-user sequences.
///
/// Per user, events are stably sorted by timestamp. A new sequence starts when
/// the session id changes or, for events without session ids, when the gap to
/// the previous event exceeds `gap_seconds`. Users are returned in id order.
pub fn build_sequences(
    events: &[Interaction],
    gap_seconds: i64,
) -> Result<Vec<UserProfile>, CorpusError> {
    if gap_seconds <= 0 {
        return Err(CorpusError::InvalidGap(gap_seconds));
    }
    let mut by_user: BTreeMap<&str, Vec<&Interaction>> = BTreeMap::new();
    for ev in events {
        by_user.entry(&ev.user_id).or_default().push(ev);
    }

    let mut profiles = Vec::with_capacity(by_user.len());
    for (user_id, mut evs) in by_user {
        evs.sort_by_key(|e| e.timestamp);
        let mut sequences: Vec<Sequence> = Vec::new();
        let mut prev: Option<&Interaction> = None;
        for ev in evs {
            let starts_new = match prev {
                None => true,
                Some(p) => match (&p.session_id, &ev.session_id) {
                    (None, None) => ev.timestamp - p.timestamp > gap_seconds,
                    (a, b) => a != b,
                },
            };
            if starts_new {
                sequences.push(Sequence {
                    user_id: user_id.to_owned(),
                    items: Vec::new(),
                    timestamps: Vec::new(),
                    start_time: ev.timestamp,
                    seq_index: sequences.len(),
                });
            }
            let seq = sequences.last_mut().expect("sequence was just pushed");
            seq.items.push(ev.item_id.clone());
            seq.timestamps.push(ev.timestamp);
            prev = Some(ev);
        }
        profiles.push(UserProfile {
            user_id: user_id.to_owned(),
            sequences,
        });
    }
    Ok(profiles)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Part {
    A,
    B,
    C,
    D,
}

impl Part {
    pub const ALL: [Part; 4] = [Part::A, Part::B, Part::C, Part::D];

    pub fn label(self) -> &'static str {
        match self {
            Part::A => "A",
            Part::B => "B",
            Part::C => "C",
            Part::D => "D",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.tsv", self.label())
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Part {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Part::A),
            "B" => Ok(Part::B),
            "C" => Ok(Part::C),
            "D" => Ok(Part::D),
            other => Err(format!("unknown part {other:?}")),
        }
    }
}

/// The four-way split. B, C and D are flat lists ordered by user id and then
/// by `seq_index`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalSplit {
    pub part_a: Vec<UserProfile>,
    pub part_b: Vec<Sequence>,
    pub part_c: Vec<Sequence>,
    pub part_d: Vec<Sequence>,
    /// Users whose second half holds a single sequence, which is then both
    /// their B and their D entry.
    pub shared_bd: BTreeSet<String>,
}

impl EvalSplit {
    pub fn sequences(&self, part: Part) -> Vec<&Sequence> {
        match part {
            Part::A => self.part_a.iter().flat_map(|p| p.sequences.iter()).collect(),
            Part::B => self.part_b.iter().collect(),
            Part::C => self.part_c.iter().collect(),
            Part::D => self.part_d.iter().collect(),
        }
    }

    /// Total number of sequence slots across the four parts.
    pub fn slot_count(&self) -> usize {
        Part::ALL.iter().map(|&p| self.sequences(p).len()).sum()
    }

    pub fn is_shared_bd(&self, user_id: &str) -> bool {
        self.shared_bd.contains(user_id)
    }
}

/// Splits profiles at `boundary` of the global start-time range.
///
/// Sequences whose relative start time is below `boundary` go to A. Each
/// user's remaining sequences are split into first (B), middle (C) and last
/// (D); a user with a single remaining sequence gets it in both B and D and is
/// recorded in [`EvalSplit::shared_bd`].
pub fn make_split(profiles: &[UserProfile], boundary: f64) -> Result<EvalSplit, CorpusError> {
    if !(boundary > 0.0 && boundary < 1.0) {
        return Err(CorpusError::InvalidBoundary(boundary));
    }
    let starts = profiles.iter().flat_map(|p| p.sequences.iter().map(|s| s.start_time));
    let (t_min, t_max) = starts.fold(None, |acc: Option<(i64, i64)>, t| match acc {
        None => Some((t, t)),
        Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
    })
    .ok_or(CorpusError::EmptyCorpus)?;
    let span = (t_max - t_min) as f64;
    let in_first_part = |t: i64| {
        if span == 0.0 {
            true
        } else {
            ((t - t_min) as f64 / span) < boundary
        }
    };

    let mut split = EvalSplit::default();
    for profile in profiles {
        let (first, second): (Vec<&Sequence>, Vec<&Sequence>) =
            profile.sequences.iter().partition(|s| in_first_part(s.start_time));
        if !first.is_empty() {
            split.part_a.push(UserProfile {
                user_id: profile.user_id.clone(),
                sequences: first.into_iter().cloned().collect(),
            });
        }
        match second.as_slice() {
            [] => {}
            [only] => {
                split.part_b.push((*only).clone());
                split.part_d.push((*only).clone());
                split.shared_bd.insert(profile.user_id.clone());
            }
            [head, middle @ .., last] => {
                split.part_b.push((*head).clone());
                split.part_c.extend(middle.iter().map(|s| (*s).clone()));
                split.part_d.push((*last).clone());
            }
        }
    }
    split.part_a.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    for part in [&mut split.part_b, &mut split.part_c, &mut split.part_d] {
        part.sort_by(|a, b| (&a.user_id, a.seq_index).cmp(&(&b.user_id, b.seq_index)));
    }
    Ok(split)
}

const SPLIT_HEADER: &str = "# user_id\titem_id\ttimestamp\tseq_index\tpart";

/// Writes one row per item in the same column layout as the input log, with
/// the sequence index in the session column and an added `part` column.
pub fn write_part<W: Write>(out: &mut W, sequences: &[&Sequence], part: Part) -> io::Result<()> {
    writeln!(out, "{SPLIT_HEADER}")?;
    for seq in sequences {
        for (item, ts) in seq.items.iter().zip(&seq.timestamps) {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                seq.user_id, item, ts, seq.seq_index, part
            )?;
        }
    }
    Ok(())
}

/// Writes `A.tsv` .. `D.tsv` into `dir`, creating it if needed.
pub fn write_split(split: &EvalSplit, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.to_owned(),
        source,
    })?;
    for part in Part::ALL {
        let path = dir.join(part.file_name());
        let io_err = |source| CorpusError::Io {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(io_err)?);
        write_part(&mut out, &split.sequences(part), part).map_err(io_err)?;
        out.flush().map_err(io_err)?;
    }
    Ok(())
}

/// Reads a part file written by [`write_part`], regrouping rows into
/// sequences in file order.
pub fn read_part(path: impl AsRef<Path>) -> Result<Vec<Sequence>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let malformed = |line: usize, message: String| CorpusError::MalformedSplit {
        path: path.to_owned(),
        line,
        message,
    };
    let mut sequences: Vec<Sequence> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(malformed(lineno + 1, format!("expected 5 columns, got {}", fields.len())));
        }
        let timestamp: i64 = fields[2]
            .parse()
            .map_err(|e| malformed(lineno + 1, format!("bad timestamp: {e}")))?;
        let seq_index: usize = fields[3]
            .parse()
            .map_err(|e| malformed(lineno + 1, format!("bad seq_index: {e}")))?;
        validate_item_id(fields[1]).map_err(|e| malformed(lineno + 1, e.to_string()))?;
        let continues = sequences
            .last()
            .is_some_and(|s| s.user_id == fields[0] && s.seq_index == seq_index);
        if !continues {
            sequences.push(Sequence {
                user_id: fields[0].to_owned(),
                items: Vec::new(),
                timestamps: Vec::new(),
                start_time: timestamp,
                seq_index,
            });
        }
        let seq = sequences.last_mut().expect("sequence was just pushed");
        seq.items.push(fields[1].to_owned());
        seq.timestamps.push(timestamp);
    }
    Ok(sequences)
}

/// Groups a flat, user-ordered sequence list into profiles.
pub fn group_by_user(sequences: Vec<Sequence>) -> Vec<UserProfile> {
    let mut profiles: Vec<UserProfile> = Vec::new();
    for seq in sequences {
        match profiles.last_mut() {
            Some(p) if p.user_id == seq.user_id => p.sequences.push(seq),
            _ => profiles.push(UserProfile {
                user_id: seq.user_id.clone(),
                sequences: vec![seq],
            }),
        }
    }
    profiles
}

/// Reads a split directory written by [`write_split`].
pub fn read_split(dir: impl AsRef<Path>) -> Result<EvalSplit, CorpusError> {
    let dir = dir.as_ref();
    let part_a = group_by_user(read_part(dir.join(Part::A.file_name()))?);
    let part_b = read_part(dir.join(Part::B.file_name()))?;
    let part_c = read_part(dir.join(Part::C.file_name()))?;
    let part_d = read_part(dir.join(Part::D.file_name()))?;
    let d_index: BTreeMap<&str, usize> = part_d
        .iter()
        .map(|s| (s.user_id.as_str(), s.seq_index))
        .collect();
    let shared_bd = part_b
        .iter()
        .filter(|b| d_index.get(b.user_id.as_str()) == Some(&b.seq_index))
        .map(|b| b.user_id.clone())
        .collect();
    Ok(EvalSplit {
        part_a,
        part_b,
        part_c,
        part_d,
        shared_bd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(user: &str, item: &str, ts: i64) -> Interaction {
        Interaction {
            user_id: user.into(),
            item_id: item.into(),
            timestamp: ts,
            session_id: None,
        }
    }

    fn seq(user: &str, start: i64, idx: usize) -> Sequence {
        Sequence {
            user_id: user.into(),
            items: vec![format!("{user}-{idx}")],
            timestamps: vec![start],
            start_time: start,
            seq_index: idx,
        }
    }

    #[test]
    fn parses_well_formed_rows() {
        let text = "u1\ti1\t100\nu1\ti2\t200\n";
        let parsed = parse_reader(text.as_bytes(), LogFormat::TsvEvents).unwrap();
        assert_eq!(parsed.interactions.len(), 2);
        assert_eq!(parsed.skipped, 0);
        assert_eq!(parsed.interactions[1], ev("u1", "i2", 200));
    }

    #[test]
    fn skips_malformed_rows() {
        let text = "# comment\nu1\t\t100\nu1\ti1\t-5\nu1\ti1\tabc\nu1\ti1\nu1\ti1\t7\n\n";
        let parsed = parse_reader(text.as_bytes(), LogFormat::TsvEvents).unwrap();
        assert_eq!(parsed.skipped, 4);
        assert_eq!(parsed.interactions, vec![ev("u1", "i1", 7)]);

        let parsed = parse_reader("u1\t\t100\n".as_bytes(), LogFormat::TsvEvents).unwrap();
        assert_eq!((parsed.interactions.len(), parsed.skipped), (0, 1));
    }

    #[test]
    fn sessions_format_requires_session_column() {
        let text = "u1\ti1\t1\nu1\ti2\t2\t\nu1\ti3\t3\ts9\n";
        let parsed = parse_reader(text.as_bytes(), LogFormat::TsvSessions).unwrap();
        assert_eq!(parsed.skipped, 2);
        assert_eq!(parsed.interactions[0].session_id.as_deref(), Some("s9"));
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = parse_log("/nonexistent/definitely/missing.tsv", LogFormat::TsvEvents);
        assert!(matches!(err, Err(CorpusError::Io { .. })));
    }

    #[test]
    fn gap_rule_cuts_sequences() {
        let events = vec![ev("u1", "a", 0), ev("u1", "b", 100), ev("u1", "c", 50_000)];
        let profiles = build_sequences(&events, DEFAULT_GAP_SECONDS).unwrap();
        assert_eq!(profiles.len(), 1);
        let items: Vec<Vec<String>> = profiles[0].sequences.iter().map(|s| s.items.clone()).collect();
        assert_eq!(items, vec![vec!["a".to_string(), "b".into()], vec!["c".into()]]);
        assert_eq!(profiles[0].sequences[1].seq_index, 1);
        assert_eq!(profiles[0].sequences[1].start_time, 50_000);
    }

    #[test]
    fn session_overrides_gap() {
        let events: Vec<Interaction> = [0, 100_000, 900_000]
            .iter()
            .map(|&t| Interaction {
                session_id: Some("s".into()),
                ..ev("u1", "x", t)
            })
            .collect();
        let profiles = build_sequences(&events, 10).unwrap();
        assert_eq!(profiles[0].sequences.len(), 1);
        assert_eq!(profiles[0].sequences[0].len(), 3);
    }

    #[test]
    fn single_event_and_empty_input() {
        let profiles = build_sequences(&[ev("u", "i", 5)], 1).unwrap();
        assert_eq!(profiles[0].sequences.len(), 1);
        assert!(build_sequences(&[], 1).unwrap().is_empty());
        assert!(matches!(build_sequences(&[], 0), Err(CorpusError::InvalidGap(0))));
    }

    #[test]
    fn ties_keep_input_order_and_duplicates_are_kept() {
        let events = vec![ev("u", "b", 10), ev("u", "a", 10), ev("u", "a", 10), ev("u", "z", 5)];
        let profiles = build_sequences(&events, 100).unwrap();
        assert_eq!(profiles[0].sequences[0].items, ["z", "b", "a", "a"]);
    }

    #[test]
    fn split_assigns_b_c_d() {
        let profile = UserProfile {
            user_id: "u".into(),
            sequences: vec![seq("u", 0, 0), seq("u", 60, 1), seq("u", 70, 2), seq("u", 80, 3), seq("u", 100, 4)],
        };
        let split = make_split(&[profile], 0.5).unwrap();
        assert_eq!(split.part_a[0].sequences.len(), 1);
        let idx = |v: &[Sequence]| v.iter().map(|s| s.seq_index).collect::<Vec<_>>();
        assert_eq!(idx(&split.part_b), [1]);
        assert_eq!(idx(&split.part_c), [2, 3]);
        assert_eq!(idx(&split.part_d), [4]);
        assert!(split.shared_bd.is_empty());
    }

    #[test]
    fn single_second_half_sequence_is_shared() {
        let profile = UserProfile {
            user_id: "u".into(),
            sequences: vec![seq("u", 0, 0), seq("u", 100, 1)],
        };
        let split = make_split(&[profile], 0.5).unwrap();
        assert_eq!(split.part_b, split.part_d);
        assert!(split.part_c.is_empty());
        assert!(split.is_shared_bd("u"));
        assert_eq!(split.slot_count(), 2 + split.shared_bd.len());
    }

    #[test]
    fn boundary_on_relative_time() {
        let profile = UserProfile {
            user_id: "u".into(),
            sequences: vec![seq("u", 10, 0), seq("u", 40, 1), seq("u", 60, 2), seq("u", 90, 3)],
        };
        let split = make_split(&[profile], 0.5).unwrap();
        let a: Vec<i64> = split.part_a[0].sequences.iter().map(|s| s.start_time).collect();
        assert_eq!(a, [10, 40]);
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(make_split(&[], 0.5), Err(CorpusError::EmptyCorpus)));
        for b in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(make_split(&[], b), Err(CorpusError::InvalidBoundary(_))));
        }
    }

    #[test]
    fn split_files_roundtrip() {
        let events: Vec<Interaction> = (0..40)
            .map(|i| ev(&format!("u{}", i % 3), &format!("i{}", i % 7), i * 10_000))
            .collect();
        let profiles = build_sequences(&events, 15_000).unwrap();
        let split = make_split(&profiles, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_split(&split, dir.path()).unwrap();
        let back = read_split(dir.path()).unwrap();
        assert_eq!(back, split);

        let first = std::fs::read(dir.path().join("B.tsv")).unwrap();
        write_split(&split, dir.path()).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("B.tsv")).unwrap());
    }

    fn arb_events() -> impl Strategy<Value = Vec<Interaction>> {
        prop::collection::vec((0u8..6, 0u8..9, 0i64..200_000), 1..120).prop_map(|rows| {
            rows.into_iter()
                .map(|(u, i, t)| ev(&format!("u{u}"), &format!("i{i}"), t))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn partition_property(events in arb_events(), boundary in 0.05f64..0.95) {
            let profiles = build_sequences(&events, 20_000).unwrap();
            let total: usize = profiles.iter().map(|p| p.sequences.len()).sum();
            let split = make_split(&profiles, boundary).unwrap();
            prop_assert_eq!(split.slot_count(), total + split.shared_bd.len());
            prop_assert_eq!(split.part_b.len(), split.part_d.len());
        }

        #[test]
        fn order_preserved(events in arb_events()) {
            let profiles = build_sequences(&events, 20_000).unwrap();
            let n: usize = profiles.iter().flat_map(|p| &p.sequences).map(|s| s.len()).sum();
            prop_assert_eq!(n, events.len());
            for p in &profiles {
                let mut prev_start = i64::MIN;
                for (i, s) in p.sequences.iter().enumerate() {
                    prop_assert_eq!(s.seq_index, i);
                    prop_assert!(s.timestamps.windows(2).all(|w| w[0] <= w[1]));
                    prop_assert!(s.start_time >= prev_start);
                    prev_start = s.start_time;
                }
            }
        }
    }
}
