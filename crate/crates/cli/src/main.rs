use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod manifest;

#[derive(Parser, Debug)]
#[command(name = "isoalign", version, about = "Align word-embedding spaces and diagnose their isomorphism")]
struct Cli {
    /// Write zero timings so reports are byte-identical across runs.
    #[arg(long, global = true)]
    no_timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvector similarity and isomorphism of sampled nearest-neighbour subgraphs.
    Diagnose(DiagnoseArgs),
    /// Learn an orthogonal mapping and refine it.
    Align(AlignArgs),
    /// Translate the gold sources and score precision at 1.
    Evaluate(EvaluateArgs),
    /// Jensen-Shannon domain similarity of two corpora.
    Domainsim(DomainsimArgs),
    /// Write a synthetic embedding pair and the noise/correlation table.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Serialize)]
struct SpaceArgs {
    /// Source embeddings (.vec)
    #[arg(long)]
    src: PathBuf,
    /// Target embeddings (.vec)
    #[arg(long)]
    tgt: PathBuf,
    /// Keep only the first N words of each file
    #[arg(long)]
    max_vocab: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Retrieval {
    Cosine,
    Csls,
}

impl From<Retrieval> for isoalign::RetrievalMethod {
    fn from(r: Retrieval) -> Self {
        match r {
            Retrieval::Cosine => Self::Cosine,
            Retrieval::Csls => Self::Csls,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct RetrievalArgs {
    #[arg(long, value_enum, default_value = "csls")]
    retrieval: Retrieval,
    /// CSLS neighbourhood size
    #[arg(long, default_value_t = 10)]
    csls_k: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Scope {
    NodeSet,
    FullVocabulary,
}

#[derive(Args, Debug, Serialize)]
struct DiagnoseArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    /// Gold dictionary, one "source target" pair per line
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    sample_size: usize,
    /// Where nearest neighbours are searched when building subgraphs
    #[arg(long, value_enum, default_value = "node-set")]
    neighbor_scope: Scope,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AlignMode {
    Identical,
    SeedFile,
    Adversarial,
}

#[derive(Args, Debug, Serialize)]
struct AlignArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    #[arg(long, value_enum, default_value = "identical")]
    mode: AlignMode,
    /// Seed dictionary for --mode seed-file
    #[arg(long, required_if_eq("mode", "seed-file"))]
    seed_dict: Option<PathBuf>,
    /// Refinement iterations
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    /// Source words considered when inducing dictionaries during refinement
    #[arg(long, default_value_t = 10_000)]
    top_frequent: usize,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    /// Adversarial training epochs
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the mapping matrix
    #[arg(long)]
    out: PathBuf,
    /// JSON report path (stdout when absent)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    spaces: SpaceArgs,
    /// Mapping matrix written by `align`
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Tab-separated "word<TAB>class" labels for the breakdown
    #[arg(long)]
    word_classes: Option<PathBuf>,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    /// Predictions TSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report path (stdout when absent)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DomainsimArgs {
    #[arg(long)]
    corpus_a: PathBuf,
    #[arg(long)]
    corpus_b: PathBuf,
    /// Translate corpus A into corpus B's language before comparing
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Keep only the N most frequent terms of each corpus
    #[arg(long)]
    max_vocab: Option<usize>,
    /// JSON report path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TransformArg {
    Rotation,
    RotationScaling,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    d: usize,
    /// Noise level of the written pair
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value = "rotation")]
    transform: TransformArg,
    #[arg(long, default_value_t = 0.0)]
    domain_shift: f64,
    /// Fraction of words given the same label on both sides
    #[arg(long, default_value_t = 0.0)]
    shared_fraction: f64,
    /// Noise levels of the correlation table
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8")]
    noise_levels: Vec<f64>,
    /// Skip the correlation table
    #[arg(long)]
    no_suite: bool,
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    sample_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use isoalign::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(
            E::Parse { .. }
            | E::NonFinite { .. }
            | E::DimensionMismatch { .. }
            | E::InvalidConfig(_)
            | E::EmptyInput(_)
            | E::NotNormalized { .. }
            | E::ZeroNorm { .. },
        ) => 2,
        Some(E::EmptySeed(_) | E::EmptyDictionary { .. }) => 3,
        Some(E::Divergence { .. }) => 4,
        Some(E::NoEvaluableQueries(_)) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Diagnose(a) => commands::diagnose(a, cli.no_timings),
        Command::Align(a) => commands::align(a, cli.no_timings),
        Command::Evaluate(a) => commands::evaluate(a, cli.no_timings),
        Command::Domainsim(a) => commands::domainsim(a, cli.no_timings),
        Command::Synth(a) => commands::synth(a, cli.no_timings),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
