//! `rspace`: build research spaces from publication records, predict field
//! transitions and extract backbones.
//!
//! Every subcommand reads and writes plain-text artifacts, so each stage can
//! be rerun on its own. Exit codes: 0 success, 1 runtime error, 2 usage or
//! configuration error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rspace_core::corpus::RecordFormat;
use rspace_core::prediction_eval::CandidatePolicy;
use rspace_core::{EntityKind, ModelTag, TimeWindow, TransitionKind};

#[derive(Parser)]
#[command(
    name = "rspace",
    version,
    about = "Research-space construction and transition prediction"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve publication records to fields and aggregate them by entity.
    Ingest(IngestArgs),
    /// Fit a field proximity matrix on one time window.
    Fit(FitArgs),
    /// Rank candidate fields for selected entities by relatedness density.
    Predict(PredictArgs),
    /// Score predictions against the transitions realized in a test window.
    Evaluate(EvaluateArgs),
    /// Extract and export a backbone of the field network.
    Backbone(BackboneArgs),
    /// Export per-entity matrices and plot source tables.
    ExportStats(ExportStatsArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Publication records file.
    #[arg(long)]
    records: PathBuf,
    /// Record file layout: jsonl or lattes-tsv.
    #[arg(long, default_value = "jsonl")]
    format: RecordFormat,
    /// Venue to field map (venue_name, field_id).
    #[arg(long)]
    venues: PathBuf,
    /// Field taxonomy (field_id, field_name, intermediate_id, ...).
    #[arg(long)]
    taxonomy: PathBuf,
    /// Aggregation level: scientist, institution or state.
    #[arg(long, default_value = "scientist")]
    kind: EntityKind,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EmbeddingArgs {
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 10)]
    negatives: usize,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
}

#[derive(Args)]
struct FitArgs {
    /// Corpus artifact written by `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    /// freq or emb.
    #[arg(long)]
    model: ModelTag,
    /// Fit window, START:END inclusive.
    #[arg(long)]
    window: TimeWindow,
    #[arg(long, default_value_t = rspace_core::presence::DEFAULT_THETA, allow_negative_numbers = true)]
    theta: f64,
    #[command(flatten)]
    emb: EmbeddingArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    SourceStage,
    AllUnset,
}

impl From<Policy> for CandidatePolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::SourceStage => CandidatePolicy::SourceStage,
            Policy::AllUnset => CandidatePolicy::AllUnset,
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Proximity artifact written by `fit`.
    #[arg(long)]
    phi: PathBuf,
    /// RCA / density window, START:END inclusive.
    #[arg(long)]
    rca: TimeWindow,
    /// 0A, ND or ID.
    #[arg(long, default_value = "0A")]
    transition: TransitionKind,
    /// Candidate set: fields in the source stage, or every field not yet set.
    #[arg(long, value_enum, default_value_t = Policy::SourceStage)]
    policy: Policy,
    /// Entities to predict for (repeatable); all entities when omitted.
    #[arg(long = "entity")]
    entities: Vec<String>,
    /// Keep the K best candidates per entity.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// One or two proximity artifacts; two also yields a permutation p-value.
    #[arg(long, required = true, num_args = 1)]
    phi: Vec<PathBuf>,
    /// Fit window; checked against the proximity artifacts when given.
    #[arg(long)]
    fit: Option<TimeWindow>,
    #[arg(long)]
    rca: TimeWindow,
    #[arg(long)]
    test: TimeWindow,
    #[arg(long, default_value = "0A")]
    transition: TransitionKind,
    #[arg(long, value_enum, default_value_t = Policy::SourceStage)]
    policy: Policy,
    #[arg(long, default_value_t = 10_000)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackboneMode {
    Disparity,
    MstThreshold,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Field,
    Intermediate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphFormat {
    Edgelist,
    Xmlgraph,
    Dot,
    Tsv,
}

#[derive(Args)]
struct BackboneArgs {
    #[arg(long)]
    phi: PathBuf,
    #[arg(long)]
    taxonomy: PathBuf,
    #[arg(long, value_enum, default_value_t = BackboneMode::Disparity)]
    mode: BackboneMode,
    /// Node level; defaults to intermediate for disparity, field otherwise.
    #[arg(long, value_enum)]
    level: Option<Level>,
    /// Disparity significance level.
    #[arg(long, default_value_t = 0.20)]
    alpha: f64,
    /// Weight threshold added on top of the maximum spanning tree.
    #[arg(long, default_value_t = 0.35)]
    p: f64,
    #[arg(long, value_enum, default_value_t = GraphFormat::Edgelist)]
    format: GraphFormat,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportStatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    window: TimeWindow,
    #[arg(long, default_value_t = rspace_core::presence::DEFAULT_THETA, allow_negative_numbers = true)]
    theta: f64,
    /// Per-entity AUROC file from `evaluate`, for coefficient-of-variation curves.
    #[arg(long)]
    auroc: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    cv_window: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<rspace_core::Error>() {
        Some(e) if e.is_config() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Backbone(a) => commands::backbone(a),
        Command::ExportStats(a) => commands::export_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
