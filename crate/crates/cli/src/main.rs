//! `cyents`: ingest, pre-annotate, serve, merge, train, extract, link, evaluate.

mod commands;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pipeline::{PipelineConfig, UsageError};

#[derive(Parser)]
#[command(name = "cyents", version, about = "Cybersecurity entity extraction toolkit")]
struct Cli {
    /// JSON pipeline config; flags override its values
    #[arg(long, global = true)]
    pipeline: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pull feeds into the corpus store
    Ingest(IngestArgs),
    /// Entity schema operations
    Schema {
        #[command(subcommand)]
        action: SchemaAction,
    },
    /// Rule-based pre-annotation of every stored document
    Prepopulate(PrepopulateArgs),
    /// Run the annotation service
    Serve(ServeArgs),
    /// Inter-annotator agreement between two annotation files
    Iaa(IaaArgs),
    /// Keep the mentions every annotator of a group agrees on
    Merge(MergeArgs),
    /// Train the statistical tagger
    Train(TrainArgs),
    /// Run the tagger (and rules) over the store
    Extract(ExtractArgs),
    /// Link extracted mentions to Wikidata
    Link(LinkArgs),
    /// Span-level precision, recall and F-score
    Eval(EvalArgs),
    /// Write a synthetic templated corpus and its gold spans
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum SchemaAction {
    /// Print a schema version as JSON
    Export {
        #[arg(long, value_name = "round1|round2")]
        version: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// feeds file: one URL per line, `#` comments
    #[arg(long)]
    feeds: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    /// serve HTTP from recorded responses in DIR instead of the network
    #[arg(long, value_name = "DIR")]
    fixture: Option<PathBuf>,
    /// minimum delay between live requests
    #[arg(long, default_value_t = 1000)]
    delay_ms: u64,
}

#[derive(Args)]
struct PrepopulateArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    /// directory of `term<TAB>type` files; the built-in seed lists otherwise
    #[arg(long)]
    gazetteers: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    port: Option<u16>,
    /// study config JSON (groups, tokens)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gazetteers: Option<PathBuf>,
    /// static annotation UI bundle
    #[arg(long)]
    ui: Option<PathBuf>,
}

#[derive(Args)]
struct IaaArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long, num_args = 2.., required = true)]
    group: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// validate spans against stored documents
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    /// TrainConfig JSON
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// add rule mentions (format matches and gazetteers) where they do not
    /// overlap model mentions take precedence from rules
    #[arg(long)]
    rules: bool,
    #[arg(long)]
    gazetteers: Option<PathBuf>,
}

#[derive(Args)]
struct LinkArgs {
    #[arg(long)]
    model_output: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    /// recorded search responses
    #[arg(long, value_name = "DIR")]
    fixture: Option<PathBuf>,
    /// live API endpoint; defaults to $CYENTS_WIKIDATA_ENDPOINT
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    /// gold spans of the training split
    #[arg(long)]
    gold: PathBuf,
    /// gold spans of the held-out split
    #[arg(long)]
    heldout_gold: PathBuf,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    heldout: usize,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.pipeline {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    use commands as c;
    match cli.command {
        Command::Ingest(a) => c::ingest(&cfg, a.feeds, a.store, a.fixture, a.delay_ms),
        Command::Schema { action: SchemaAction::Export { version, out } } => c::schema_export(&cfg, version, out),
        Command::Prepopulate(a) => c::prepopulate(&cfg, a.store, a.gazetteers, a.out),
        Command::Serve(a) => c::serve(&cfg, a.store, a.annotations, a.port, a.config, a.gazetteers, a.ui),
        Command::Iaa(a) => c::iaa(&cfg, a.a, a.b, a.store, a.json),
        Command::Merge(a) => c::merge(&cfg, a.group, a.out, a.store),
        Command::Train(a) => c::train(&cfg, a.data, a.store, a.config, a.out, a.epochs, a.seed),
        Command::Extract(a) => c::extract(&cfg, a.model, a.store, a.out, a.rules, a.gazetteers),
        Command::Link(a) => c::link(&cfg, a.model_output, a.store, a.fixture, a.endpoint, a.out),
        Command::Eval(a) => c::eval(&cfg, a.gold, a.pred, a.store, a.json),
        Command::Synth(a) => c::synth(&cfg, a.store, a.gold, a.heldout_gold, a.seed, a.train, a.heldout),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
