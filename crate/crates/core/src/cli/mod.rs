//! The `orthoplan` command line.
//!
//! Every subcommand takes `--config FILE` (TOML, see [`RunConfig`]) and flags;
//! flags win over the file. Exit codes: 0 success, 1 usage, 2 data or
//! validation error, 3 numerical failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::classifier::{Activation, Optimizer};
use crate::error::Error;
use crate::features::{FeatureKind, TokenizerScheme};

pub use config::{Paths, RankInput, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(Error::Numerical(_)) => 3,
            CliError::Lib(_) => 2,
        }
    }
}

/// Turns a configuration check failure into a usage error.
fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "orthoplan", version, about = "Problem extraction and treatment prioritization from findings text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus and label catalog.
    GenSynth(GenSynthArgs),
    /// Split the corpus and build the findings vocabulary.
    BuildFeatures(BuildFeaturesArgs),
    /// Train the multi-label problem classifier over a hidden-size grid.
    TrainClassifier(TrainClassifierArgs),
    /// Train the pairwise problem ranker over a C grid.
    TrainRanker(TrainRankerArgs),
    /// Score trained models on a split partition.
    Evaluate(EvaluateArgs),
    /// Print a prioritized problem list for one findings text.
    Predict(PredictArgs),
    /// Corpus summary statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Classifier model file.
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Ranker model file.
    #[arg(long)]
    ranker: Option<PathBuf>,
    /// Report output file.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_parser = parse_enum::<TokenizerScheme>)]
    tokenizer: Option<TokenizerScheme>,
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    #[command(flatten)]
    common: Common,
    /// Number of certificates.
    #[arg(long)]
    n: Option<usize>,
    /// Number of grouped labels.
    #[arg(long)]
    labels: Option<usize>,
    /// Number of fine labels grouped onto the labels.
    #[arg(long)]
    fine_labels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Label noise rate in [0, 1].
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    priority_noise: Option<f64>,
    /// Mean number of problems per certificate.
    #[arg(long)]
    mean_problems: Option<f64>,
    #[arg(long)]
    keywords: Option<usize>,
}

#[derive(Debug, Args)]
struct BuildFeaturesArgs {
    #[command(flatten)]
    common: Common,
    /// Train, validation and test ratios, comma separated.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    min_count: Option<usize>,
    /// Also dump the training preference pairs here.
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainClassifierArgs {
    #[command(flatten)]
    common: Common,
    /// bow or embedding.
    #[arg(long, value_parser = parse_enum::<FeatureKind>)]
    features: Option<FeatureKind>,
    /// Hidden sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_parser = parse_enum::<Optimizer>)]
    optimizer: Option<Optimizer>,
    #[arg(long, value_parser = parse_enum::<Activation>)]
    activation: Option<Activation>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainRankerArgs {
    #[command(flatten)]
    common: Common,
    /// ook, bow or embedding.
    #[arg(long, value_parser = parse_enum::<FeatureKind>)]
    features: Option<FeatureKind>,
    /// C values, comma separated.
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Partition {
    Validation,
    Test,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Partition::Test)]
    partition: Partition,
    #[arg(long, value_enum)]
    rank_input: Option<RankInput>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Findings text.
    #[arg(long, conflicts_with = "text_file")]
    text: Option<String>,
    /// File holding the findings text; `-` reads standard input.
    #[arg(long)]
    text_file: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    common: Common,
}

impl Common {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let p = &mut cfg.paths;
        macro_rules! over {
            ($($f:ident),*) => {$( if self.$f.is_some() { p.$f = self.$f; } )*};
        }
        over!(corpus, catalog, split, vocab, embeddings, classifier, ranker, report);
        if let Some(t) = self.tokenizer {
            cfg.tokenizer = t;
        }
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenSynth(a) => {
            let mut cfg = a.common.into_config()?;
            let s = &mut cfg.synth;
            set(&mut s.n_certificates, a.n);
            set(&mut s.n_labels, a.labels);
            if a.fine_labels.is_some() {
                s.n_fine_labels = a.fine_labels;
            }
            set(&mut s.rng_seed, a.seed);
            set(&mut s.label_noise_rate, a.noise);
            set(&mut s.priority_noise, a.priority_noise);
            set(&mut s.problems_per_cert_mean, a.mean_problems);
            set(&mut s.keywords_per_label, a.keywords);
            commands::gen_synth(&cfg)
        }
        Command::BuildFeatures(a) => {
            let mut cfg = a.common.into_config()?;
            if let Some(r) = a.ratios {
                cfg.split_ratios = r
                    .try_into()
                    .map_err(|_| CliError::Usage("--ratios takes exactly three values".into()))?;
            }
            set(&mut cfg.split_seed, a.split_seed);
            set(&mut cfg.min_count, a.min_count);
            commands::build_features(&cfg, a.pairs.as_deref())
        }
        Command::TrainClassifier(a) => {
            let mut cfg = a.common.into_config()?;
            set(&mut cfg.feature_kind, a.features);
            let t = &mut cfg.train;
            set(&mut t.hidden_grid, a.hidden);
            set(&mut t.max_epochs, a.epochs);
            set(&mut t.patience, a.patience);
            set(&mut t.learning_rate, a.learning_rate);
            set(&mut t.batch_size, a.batch_size);
            set(&mut t.decision_threshold, a.threshold);
            set(&mut t.optimizer, a.optimizer);
            set(&mut t.hidden_activation, a.activation);
            set(&mut t.rng_seed, a.seed);
            commands::train_classifier(&cfg)
        }
        Command::TrainRanker(a) => {
            let mut cfg = a.common.into_config()?;
            set(&mut cfg.rank_feature_kind, a.features);
            let r = &mut cfg.rank;
            set(&mut r.c_grid, a.c_grid);
            set(&mut r.max_epochs, a.epochs);
            set(&mut r.tolerance, a.tolerance);
            set(&mut r.rng_seed, a.seed);
            commands::train_ranker(&cfg)
        }
        Command::Evaluate(a) => {
            let mut cfg = a.common.into_config()?;
            set(&mut cfg.rank_input, a.rank_input);
            set(&mut cfg.train.decision_threshold, a.threshold);
            commands::evaluate(&cfg, a.partition == Partition::Test)
        }
        Command::Predict(a) => {
            let mut cfg = a.common.into_config()?;
            set(&mut cfg.train.decision_threshold, a.threshold);
            let text = match (a.text, a.text_file) {
                (Some(t), _) => t,
                (None, Some(p)) if p.as_os_str() == "-" => {
                    std::io::read_to_string(std::io::stdin())
                        .map_err(|e| CliError::Usage(format!("cannot read standard input: {e}")))?
                }
                (None, Some(p)) => std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?,
                (None, None) => return Err(CliError::Usage("predict needs --text or --text-file".into())),
            };
            commands::predict(&cfg, &text)
        }
        Command::Stats(a) => commands::stats(&a.common.into_config()?),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
