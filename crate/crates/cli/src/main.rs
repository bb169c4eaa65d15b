//! `vidsafe` command-line entry point.

mod commands;
mod common;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::{DataArgs, ProviderArgs, ThumbArgs, TrainArgs};

/// Collect, label, model and audit toddler-targeted videos.
#[derive(Debug, Parser)]
#[command(name = "vidsafe", version)]
pub struct Cli {
    /// Flat `key = value` config file; `${VAR}` is read from the environment.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the `seed` config key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory holding the lock file; defaults to the output location.
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gather seed videos and snowball through their recommendations.
    Collect {
        /// Keyword file (one per line) for the Elsagate-related strategy.
        #[arg(long)]
        elsagate_keywords: Option<PathBuf>,
        /// Channel-id file whose uploads count as Elsagate-related.
        #[arg(long)]
        elsagate_channels: Option<PathBuf>,
        /// Keyword file for the other child-related strategy.
        #[arg(long)]
        child_keywords: Option<PathBuf>,
        /// Region-code file for the popular-videos strategy.
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Number of random videos.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 10)]
        fanout: usize,
        #[arg(long, default_value_t = 3)]
        depth: u32,
        /// Result cap of each search or chart request.
        #[arg(long, default_value_t = 30)]
        per_request: usize,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        /// Snowball checkpoint; an existing file resumes the crawl.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-query every video and count removed and age-restricted ones.
    Audit {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Reference time (RFC 3339) for video ages; defaults to now.
        #[arg(long)]
        now: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve labelling tasks over HTTP until interrupted.
    AnnotateServe {
        #[arg(long)]
        dataset: PathBuf,
        /// Event log; created if missing, replayed if present.
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Annotator ids to register (repeatable).
        #[arg(long = "annotator")]
        annotators: Vec<String>,
    },
    /// Majority-aggregate votes into ground truth and report Fleiss' kappa.
    Aggregate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        events: PathBuf,
        /// Output dataset directory with ground truth attached.
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode every video into model inputs.
    Featurize {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        thumbs: ThumbArgs,
        /// Output directory for `features.jsonl` and `featurizer.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the fusion classifier on the labelled videos.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Decision threshold on the inappropriate probability.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified cross-validation of the classifier and the baselines.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Comma-separated baselines, `all` or `none`.
        #[arg(long, default_value = "all")]
        baselines: String,
        /// Report file (TSV); the full report is written next to it as JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the classifier on every non-empty subset of branches.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every video of a dataset with a trained model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        thumbs: ThumbArgs,
        /// Output `video_id<TAB>label<TAB>probability` file.
        #[arg(long)]
        out: PathBuf,
        /// Skip report; defaults to `<out>.skipped.tsv`.
        #[arg(long)]
        skips: Option<PathBuf>,
    },
    /// Prevalence and class-transition tables of the recommendation graph.
    GraphReport {
        #[arg(long)]
        dataset: PathBuf,
        /// Binary labels, e.g. the output of `classify`.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_out_degree: usize,
        /// Leave self-loops out of the transition counts.
        #[arg(long)]
        no_self_loops: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keyword-seeded random walks through recommendations.
    Walk {
        #[arg(long)]
        keywords: PathBuf,
        /// Walks per keyword.
        #[arg(long, default_value_t = 100)]
        walks: usize,
        #[arg(long, default_value_t = 10)]
        hops: usize,
        /// Search results the start is drawn from.
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, default_value_t = 10)]
        fanout: usize,
        #[arg(long)]
        avoid_revisits: bool,
        /// Keep keywords that contain dictionary terms.
        #[arg(long)]
        no_sanitize: bool,
        /// Classify visits with this model.
        #[arg(long, conflicts_with = "labels")]
        model: Option<PathBuf>,
        /// Classify visits from a label file instead of a model.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        thumbs: ThumbArgs,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Trace log (JSON lines); an existing log resumes the campaign.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-hop cumulative hit rates of a walk campaign, grouped by keyword cluster.
    WalkReport {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value_t = 5)]
        clusters: usize,
        /// `cluster_id<TAB>name` file.
        #[arg(long)]
        cluster_names: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        hops: usize,
        /// Output directory for `hops.tsv` and `clusters.tsv`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(vidsafe::run::exit_code(&e) as u8)
        }
    }
}
