mod commands;
mod error;

use clap::{Args, Parser, Subcommand, ValueEnum};
use error::CliError;
use std::path::PathBuf;

/// Seed used whenever `--seed` is not given.
pub const DEFAULT_SEED: u64 = 2009;

#[derive(Parser, Debug)]
#[command(name = "certsieve", version, about = "Harvest TLS certificates and classify fraudulent domains")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Probe domains over HTTP and HTTPS and store what they serve.
    Probe(ProbeArgs),
    /// Turn a harvested corpus into a feature CSV.
    Extract(ExtractArgs),
    /// Train a classifier on a labeled feature CSV.
    Train(TrainArgs),
    /// Cross-validate a classifier on a labeled feature CSV.
    Eval(EvalArgs),
    /// Label domains with a trained model.
    Classify(ClassifyArgs),
    /// Summary tables and CDF series.
    Report(ReportArgs),
    /// Sample a synthetic labeled feature CSV from marginal specs.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// File with one domain per line.
    #[arg(long)]
    pub domains: PathBuf,
    /// Corpus file (NDJSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Keep existing records in `--out` and add the new ones.
    #[arg(long)]
    pub append: bool,
    #[arg(long, default_value_t = 32)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 5000)]
    pub connect_timeout_ms: u64,
    #[arg(long, default_value_t = 10000)]
    pub handshake_timeout_ms: u64,
    #[arg(long, default_value_t = 1)]
    pub retries: u32,
    #[arg(long, default_value_t = 80)]
    pub http_port: u16,
    #[arg(long, default_value_t = 443)]
    pub https_port: u16,
    /// Address override, `name=ip`; repeatable.
    #[arg(long, value_name = "NAME=IP")]
    pub resolve: Vec<String>,
}

#[derive(Args, Debug)]
pub struct CertInputs {
    /// PEM bundle of trusted roots.
    #[arg(long)]
    pub trust_store: Option<PathBuf>,
    /// Placeholder subject values, one per line.
    #[arg(long)]
    pub bogus_list: Option<PathBuf>,
    /// Shingle width for name similarity.
    #[arg(long, default_value = "2")]
    pub shingle: certsieve::features::Shingle,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub certs: CertInputs,
    /// Use a previously built corpus index instead of building one.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Write the corpus index used for extraction.
    #[arg(long)]
    pub index_out: Option<PathBuf>,
    /// Label every row.
    #[arg(long, conflicts_with = "labels")]
    pub label: Option<certsieve::features::Label>,
    /// CSV of `domain,label` pairs.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    Tree,
    Bagging,
    Forest,
    Knn,
}

impl From<Algo> for certsieve::ml::ModelKind {
    fn from(a: Algo) -> Self {
        use certsieve::ml::ModelKind;
        match a {
            Algo::Tree => ModelKind::Tree,
            Algo::Bagging => ModelKind::BaggedTrees,
            Algo::Forest => ModelKind::Forest,
            Algo::Knn => ModelKind::Knn,
        }
    }
}

#[derive(Args, Debug)]
pub struct ModelOptions {
    #[arg(long, value_enum, default_value_t = Algo::Forest)]
    pub algo: Algo,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Ensemble size.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Features examined per split: a count, `sqrt` or `all`.
    #[arg(long)]
    pub max_features: Option<String>,
    /// Neighbours for knn.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated features to use, e.g. `f1,f2,f3`.
    #[arg(long)]
    pub include: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub model: ModelOptions,
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Number of folds.
    #[arg(long, default_value_t = 10)]
    pub cv: usize,
    #[command(flatten)]
    pub model: ModelOptions,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required_unless_present = "features", conflicts_with = "features")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub certs: CertInputs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(subcommand)]
    pub kind: ReportKind,
}

#[derive(Subcommand, Debug)]
pub enum ReportKind {
    /// Percent of rows with each boolean feature set, per dataset.
    Table {
        /// `name=features.csv`; repeatable.
        #[arg(long = "dataset", value_name = "NAME=CSV", required = true)]
        datasets: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cumulative distribution of one numeric feature.
    Cdf {
        #[arg(long)]
        features: PathBuf,
        /// f13, f14 or f15.
        #[arg(long)]
        feature: certsieve::features::FeatureId,
        /// Only rows with this label.
        #[arg(long)]
        label: Option<certsieve::features::Label>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP/HTTPS availability breakdown per corpus.
    Categories {
        /// `name=corpus.ndjson`; repeatable.
        #[arg(long = "corpus", value_name = "NAME=NDJSON", required = true)]
        corpora: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Spec file, or the name of a shipped spec.
    #[arg(long)]
    pub pos_spec: String,
    #[arg(long)]
    pub neg_spec: String,
    /// Rows per class.
    #[arg(long, default_value_t = 420)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Probe(a) => commands::probe(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Classify(a) => commands::classify(a),
        Command::Report(a) => commands::report(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
