use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use seqrec::corpus::{self, EvalSplit, LogFormat, Sequence};
use seqrec::embed::{self, build_vocab, TrainingCorpus};
use seqrec::harness::synthetic::{generate, SyntheticSpec};
use seqrec::harness::{
    self, compare_configs, Aggregation, EvalConfig, RunPlan, SweepAxis, UserScore,
};
use seqrec::recindex::ScoredSequence;
use seqrec::subseq::{self, NgramRange};

use super::{Command, ConfigArgs, DataArgs};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            input,
            format,
            gap_seconds,
            output,
        } => ingest(&input, &format, gap_seconds, output.as_deref()),
        Command::Split {
            input,
            format,
            gap_seconds,
            boundary,
            out_dir,
        } => split(&input, &format, gap_seconds, boundary, &out_dir),
        Command::Train {
            data,
            cfg,
            model,
            export,
        } => train(&data, &cfg, &model, export.as_deref()),
        Command::Recommend {
            data,
            cfg,
            model,
            output,
        } => recommend(&data, &cfg, &model, output.as_deref()),
        Command::Score {
            recommendations,
            references,
            aggregation,
            per_user,
            summary,
        } => score(&recommendations, &references, &aggregation, per_user.as_deref(), summary.as_deref()),
        Command::Run { data, cfg, output } => run(&data, &cfg, output.as_deref()),
        Command::Sweep {
            data,
            cfg,
            axis,
            values,
            parallel,
            output,
        } => sweep(&data, &cfg, &axis, values, parallel, output.as_deref()),
        Command::Compare { reports, output } => compare(&reports, output.as_deref()),
        Command::Grams {
            items,
            min_n,
            max_n,
            no_boundaries,
            buckets,
        } => grams(&items, min_n, max_n, !no_boundaries, buckets),
        Command::Synth {
            users,
            topics,
            exclusive_topics,
            seed,
            output,
        } => synth(users, topics, exclusive_topics, seed, output.as_deref()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_config(args: &ConfigArgs) -> Result<EvalConfig> {
    let mut cfg = match &args.config {
        Some(path) => EvalConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => EvalConfig::default(),
    };
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(key.trim(), value)?;
    }
    let flags = [
        ("config_type", &args.config_type),
        ("mode", &args.mode),
        ("dim", &args.dim),
        ("min_n", &args.min_n),
        ("max_n", &args.max_n),
        ("with_boundaries", &args.with_boundaries),
        ("window", &args.window),
        ("negatives", &args.negatives),
        ("epochs", &args.epochs),
        ("lr", &args.lr),
        ("seed", &args.seed),
        ("bucket_count", &args.bucket_count),
        ("min_count", &args.min_count),
        ("subsample", &args.subsample),
        ("threads", &args.threads),
        ("k", &args.k),
        ("neighbors", &args.neighbors),
        ("gap_seconds", &args.gap_seconds),
        ("boundary", &args.boundary),
        ("query_prefix_fraction", &args.query_prefix_fraction),
        ("aggregation", &args.aggregation),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_format(format: &str) -> Result<LogFormat> {
    Ok(format.parse::<LogFormat>()?)
}

fn load_profiles(input: &Path, format: &str, gap_seconds: i64) -> Result<Vec<corpus::UserProfile>> {
    let parsed = corpus::parse_log(input, parse_format(format)?)?;
    if parsed.skipped > 0 {
        log::warn!("{}: skipped {} malformed rows", input.display(), parsed.skipped);
    }
    Ok(corpus::build_sequences(&parsed.interactions, gap_seconds)?)
}

fn load_split(data: &DataArgs, cfg: &EvalConfig) -> Result<EvalSplit> {
    match (&data.split, &data.input) {
        (Some(dir), _) => corpus::read_split(dir).with_context(|| format!("reading split {}", dir.display())),
        (None, Some(input)) => {
            let profiles = load_profiles(input, &data.format, cfg.gap_seconds)?;
            Ok(corpus::make_split(&profiles, cfg.boundary)?)
        }
        (None, None) => bail!("either --split or --input is required"),
    }
}

#[derive(Serialize)]
struct SequenceRow<'a> {
    user: &'a str,
    seq_index: usize,
    start_time: i64,
    items: &'a [String],
}

fn ingest(input: &Path, format: &str, gap_seconds: i64, out: Option<&Path>) -> Result<()> {
    let profiles = load_profiles(input, format, gap_seconds)?;
    let mut w = output(out)?;
    let mut n = 0;
    for s in profiles.iter().flat_map(|p| &p.sequences) {
        let row = SequenceRow {
            user: &s.user_id,
            seq_index: s.seq_index,
            start_time: s.start_time,
            items: &s.items,
        };
        serde_json::to_writer(&mut w, &row)?;
        writeln!(w)?;
        n += 1;
    }
    w.flush()?;
    eprintln!("{} users, {n} sequences", profiles.len());
    Ok(())
}

fn split(input: &Path, format: &str, gap_seconds: i64, boundary: f64, out_dir: &Path) -> Result<()> {
    let profiles = load_profiles(input, format, gap_seconds)?;
    let split = corpus::make_split(&profiles, boundary)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    corpus::write_split(&split, out_dir)?;
    eprintln!(
        "A: {} users / {} sequences, B: {}, C: {}, D: {}, shared B/D users: {}",
        split.part_a.len(),
        split.sequences(corpus::Part::A).len(),
        split.part_b.len(),
        split.part_c.len(),
        split.part_d.len(),
        split.shared_bd.len()
    );
    Ok(())
}

fn train(data: &DataArgs, args: &ConfigArgs, model_path: &Path, export: Option<&Path>) -> Result<()> {
    let cfg = build_config(args)?;
    let split = load_split(data, &cfg)?;
    let corpus = TrainingCorpus::from_profiles(&split.part_a);
    let vocab = build_vocab(&corpus, cfg.hp.min_count)?;
    let start = Instant::now();
    let (model, report) = embed::train_with_report(&corpus, vocab, &cfg.hp)?;
    for (epoch, loss) in report.epoch_losses.iter().enumerate() {
        eprintln!("epoch {}: mean loss {loss:.5}", epoch + 1);
    }
    eprintln!(
        "{} tokens in vocabulary, {} updates, {:.2?}",
        model.vocab().len(),
        report.updates,
        start.elapsed()
    );
    embed::save_model(&model, model_path).with_context(|| format!("writing {}", model_path.display()))?;
    if let Some(path) = export {
        let mut w = output(Some(path))?;
        embed::export_jsonl(&model, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct RecRow {
    user: String,
    seq_index: usize,
    cold_start: bool,
    /// Leading items of the reference at `seq_index` used as the query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    query_prefix_len: Option<usize>,
    recommendations: Vec<RecItem>,
}

#[derive(Serialize, Deserialize)]
struct RecItem {
    items: Vec<String>,
    score: f64,
}

impl From<&ScoredSequence> for RecItem {
    fn from(s: &ScoredSequence) -> Self {
        RecItem {
            items: s.items.clone(),
            score: s.score,
        }
    }
}

fn recommend(data: &DataArgs, args: &ConfigArgs, model_path: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = build_config(args)?;
    let split = load_split(data, &cfg)?;
    let model = embed::load_model(model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let plan = RunPlan::new(&split, cfg.config_type, cfg.query_prefix_fraction)?;
    let index = plan.build_index(&model)?;
    let mut w = output(out)?;
    let mut empty = 0;
    for (query, list) in harness::recommend_plan(&plan, &index, cfg.k)? {
        empty += usize::from(list.is_empty());
        let row = RecRow {
            user: query.user_id.clone(),
            seq_index: query.query_seq_index,
            cold_start: query.cold_start,
            query_prefix_len: query.prefix_len,
            recommendations: list.ranked.iter().map(RecItem::from).collect(),
        };
        serde_json::to_writer(&mut w, &row)?;
        writeln!(w)?;
    }
    w.flush()?;
    eprintln!(
        "{} users, {} cold start, {} skipped, {} empty lists, {} candidates ({} filtered as test sequences)",
        plan.queries.len(),
        plan.cold_start_users(),
        plan.skipped_users,
        empty,
        index.len(),
        plan.leak_filtered
    );
    Ok(())
}

#[derive(Serialize)]
struct ScoreSummary {
    aggregation: Aggregation,
    users: usize,
    skipped_users: usize,
    empty_recommendations: usize,
    clamp_events: usize,
    rouge1_precision: f64,
    rouge1_recall: f64,
    rouge1_f: f64,
    rougel_precision: f64,
    rougel_recall: f64,
    rougel_f: f64,
}

fn score(
    recs_path: &Path,
    reference_paths: &[PathBuf],
    aggregation: &str,
    per_user: Option<&Path>,
    summary: Option<&Path>,
) -> Result<()> {
    let aggregation: Aggregation = aggregation.parse().map_err(anyhow::Error::msg)?;
    let mut refs: BTreeMap<String, BTreeMap<usize, Sequence>> = BTreeMap::new();
    for path in reference_paths {
        for s in corpus::read_part(path)? {
            refs.entry(s.user_id.clone()).or_default().entry(s.seq_index).or_insert(s);
        }
    }
    let file = File::open(recs_path).with_context(|| format!("cannot open {}", recs_path.display()))?;
    let mut scores: Vec<UserScore> = Vec::new();
    let (mut skipped, mut empty) = (0, 0);
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RecRow = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad recommendation row", recs_path.display(), lineno + 1))?;
        let references: Vec<Vec<String>> = refs
            .get(&row.user)
            .into_iter()
            .flat_map(|m| m.values())
            .filter_map(|s| match (s.seq_index == row.seq_index, row.query_prefix_len) {
                (false, _) => Some(s.items.clone()),
                (true, Some(p)) => Some(s.items.get(p..).unwrap_or_default().to_vec()),
                (true, None) => None,
            })
            .filter(|items| !items.is_empty())
            .collect();
        if references.is_empty() {
            skipped += 1;
            continue;
        }
        empty += usize::from(row.recommendations.is_empty());
        let recs: Vec<&[String]> = row.recommendations.iter().map(|r| r.items.as_slice()).collect();
        scores.push(harness::score_user(&row.user, &references, &recs, aggregation)?);
    }
    let [r1p, r1r, r1f, rlp, rlr, rlf] = harness::summarize(&scores, aggregation);
    let summary_row = ScoreSummary {
        aggregation,
        users: scores.len(),
        skipped_users: skipped,
        empty_recommendations: empty,
        clamp_events: scores.iter().map(|s| s.clamp_events).sum(),
        rouge1_precision: r1p,
        rouge1_recall: r1r,
        rouge1_f: r1f,
        rougel_precision: rlp,
        rougel_recall: rlr,
        rougel_f: rlf,
    };

    let mut w = csv::Writer::from_writer(output(per_user)?);
    for s in &scores {
        w.serialize(s)?;
    }
    w.flush()?;
    let sink: Box<dyn Write> = match summary {
        Some(_) => output(summary)?,
        None => Box::new(io::stderr().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.serialize(&summary_row)?;
    w.flush()?;
    Ok(())
}

fn require_seed(args: &ConfigArgs) -> Result<()> {
    if args.seed.is_none() {
        bail!("--seed is required for run");
    }
    Ok(())
}

fn run(data: &DataArgs, args: &ConfigArgs, out: Option<&Path>) -> Result<()> {
    require_seed(args)?;
    let cfg = build_config(args)?;
    let split = load_split(data, &cfg)?;
    let report = harness::run(&cfg, &split)?;
    let mut w = output(out)?;
    harness::write_reports(&mut w, std::slice::from_ref(&report))?;
    w.flush()?;
    eprintln!(
        "type {}: ROUGE-1 P {:.4} R {:.4}, ROUGE-L P {:.4} R {:.4}; {} users ({} cold start); {:.0} ms",
        report.config_type,
        report.rouge1_precision,
        report.rouge1_recall,
        report.rougel_precision,
        report.rougel_recall,
        report.users_evaluated,
        report.cold_start_users,
        report.wall_clock_ms
    );
    Ok(())
}

fn sweep(
    data: &DataArgs,
    args: &ConfigArgs,
    axis: &str,
    values: Vec<String>,
    parallel: bool,
    out: Option<&Path>,
) -> Result<()> {
    let axis: SweepAxis = axis.parse().map_err(anyhow::Error::msg)?;
    let cfg = build_config(args)?;
    let split = load_split(data, &cfg)?;
    let values = if values.is_empty() { axis.default_values() } else { values };
    let reports = harness::sweep(&cfg, &split, axis, &values, parallel)?;
    let mut w = output(out)?;
    harness::write_reports(&mut w, &reports)?;
    w.flush()?;
    for r in &reports {
        if r.is_ok() {
            eprintln!(
                "{}: ROUGE-1 R {:.4}, ROUGE-L R {:.4} ({:.0} ms)",
                r.label, r.rouge1_recall, r.rougel_recall, r.wall_clock_ms
            );
        } else {
            eprintln!("{}: failed: {}", r.label, r.error);
        }
    }
    Ok(())
}

fn compare(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut reports = Vec::new();
    for p in paths {
        reports.extend(harness::load_reports(p).with_context(|| format!("reading {}", p.display()))?);
    }
    let cmp = compare_configs(&reports)?;
    print!("{}", cmp.render());
    if let Some(path) = out {
        let mut w = output(Some(path))?;
        cmp.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn grams(items: &[String], min_n: usize, max_n: usize, with_boundaries: bool, buckets: Option<u32>) -> Result<()> {
    for id in items {
        subseq::validate_item_id(id)?;
    }
    let range = NgramRange::new(min_n, max_n, with_boundaries)?;
    let mut w = output(None)?;
    for gram in subseq::extract_ngrams(items, range) {
        match buckets {
            Some(0) => bail!("--buckets must be at least 1"),
            Some(b) => writeln!(w, "{gram}\t{}", subseq::gram_bucket(&gram, b))?,
            None => writeln!(w, "{gram}")?,
        }
    }
    w.flush()?;
    Ok(())
}

fn synth(users: usize, topics: usize, exclusive_topics: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    if topics <= exclusive_topics {
        bail!("--topics must exceed --exclusive-topics");
    }
    let corpus = generate(&SyntheticSpec {
        users,
        topics,
        exclusive_topics,
        seed,
        ..SyntheticSpec::default()
    });
    let mut w = output(out)?;
    for e in &corpus.interactions {
        writeln!(w, "{}\t{}\t{}", e.user_id, e.item_id, e.timestamp)?;
    }
    w.flush()?;
    eprintln!(
        "{} interactions, {} users ({} cold start)",
        corpus.interactions.len(),
        users,
        corpus.cold_start_users.len()
    );
    Ok(())
}
