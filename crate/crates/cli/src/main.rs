//! `seqrec` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "seqrec", version, about = "Embed, recommend and evaluate multi-item interaction sequences")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

/// Where the evaluation split comes from: a split directory or a raw log.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Directory holding A.tsv, B.tsv, C.tsv and D.tsv.
    #[arg(long, conflicts_with = "input")]
    split: Option<PathBuf>,
    /// Raw interaction log, split on the fly with the configured gap and boundary.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Log format: tsv_events (user, item, timestamp) or tsv_sessions (plus session id).
    #[arg(long, default_value = "tsv_events")]
    format: String,
}

/// Config file plus per-key overrides. Flags win over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra KEY=VALUE override; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    config_type: Option<String>,
    /// sg or cbow.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    min_n: Option<String>,
    #[arg(long)]
    max_n: Option<String>,
    #[arg(long)]
    with_boundaries: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    negatives: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    bucket_count: Option<String>,
    #[arg(long)]
    min_count: Option<String>,
    /// Subsampling threshold, or "none".
    #[arg(long)]
    subsample: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    neighbors: Option<String>,
    #[arg(long)]
    gap_seconds: Option<String>,
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long)]
    query_prefix_fraction: Option<String>,
    /// macro or micro.
    #[arg(long)]
    aggregation: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a log into per-user sequences (JSON lines).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "tsv_events")]
        format: String,
        #[arg(long, default_value_t = seqrec::corpus::DEFAULT_GAP_SECONDS)]
        gap_seconds: i64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Split a log into parts A-D and write them as TSV files.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "tsv_events")]
        format: String,
        #[arg(long, default_value_t = seqrec::corpus::DEFAULT_GAP_SECONDS)]
        gap_seconds: i64,
        #[arg(long, default_value_t = seqrec::corpus::DEFAULT_BOUNDARY)]
        boundary: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train sequence embeddings on part A and save the model.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        /// Also write composed vocabulary vectors as JSON lines.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Recommend top-k sequences per user for a configuration (JSON lines).
    Recommend {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score recommendation JSON lines against reference part files.
    Score {
        #[arg(long)]
        recommendations: PathBuf,
        /// Reference part file(s) in split TSV layout; may repeat.
        #[arg(long = "references", required = true)]
        references: Vec<PathBuf>,
        #[arg(long, default_value = "macro")]
        aggregation: String,
        /// Per-user CSV; stdout when omitted.
        #[arg(long)]
        per_user: Option<PathBuf>,
        /// Summary CSV; stderr when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Train, recommend and score one configuration; writes a RunReport CSV.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run one configuration per value of a hyperparameter.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// max_n, dim or mode.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; the axis's default grid when omitted.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Run sweep points concurrently.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate metric deltas between RunReport CSVs.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Delta CSV; only the table is printed when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the grams of an item list, one per line.
    Grams {
        /// Comma-separated item ids.
        #[arg(long, value_delimiter = ',', required = true)]
        items: Vec<String>,
        #[arg(long, default_value_t = 1)]
        min_n: usize,
        #[arg(long, default_value_t = 5)]
        max_n: usize,
        #[arg(long)]
        no_boundaries: bool,
        /// Also print each gram's bucket for this bucket count.
        #[arg(long)]
        buckets: Option<u32>,
    },
    /// Write a seeded synthetic interaction log (tsv_events).
    Synth {
        #[arg(long, default_value_t = 600)]
        users: usize,
        #[arg(long, default_value_t = 24)]
        topics: usize,
        #[arg(long, default_value_t = 4)]
        exclusive_topics: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
