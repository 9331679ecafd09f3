use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::corpus::SynthSpec;
use crate::features::{FeatureKind, TokenizerScheme};
use crate::ranker::RankTrainConfig;

use super::CliError;

/// Which problem lists the ranker is scored on during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RankInput {
    /// The annotated problems of each certificate.
    #[default]
    Gold,
    /// Annotated problems whose class the classifier also predicted.
    Predicted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
    pub ranker: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Everything a subcommand may need. Loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub tokenizer: TokenizerScheme,
    pub min_count: usize,
    /// Classifier input encoding.
    pub feature_kind: FeatureKind,
    /// Ranker input encoding.
    pub rank_feature_kind: FeatureKind,
    pub split_ratios: [f64; 3],
    pub split_seed: u64,
    pub rank_input: RankInput,
    pub train: TrainConfig,
    pub rank: RankTrainConfig,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            tokenizer: TokenizerScheme::Whitespace,
            min_count: 5,
            feature_kind: FeatureKind::Bow,
            rank_feature_kind: FeatureKind::Ook,
            // 810 / 90 / 90 at 990 certificates
            split_ratios: [9.0 / 11.0, 1.0 / 11.0, 1.0 / 11.0],
            split_seed: 7,
            rank_input: RankInput::Gold,
            train: TrainConfig::default(),
            rank: RankTrainConfig::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn ratios(&self) -> (f64, f64, f64) {
        let [a, b, c] = self.split_ratios;
        (a, b, c)
    }

    /// Path `name` or a usage error naming the flag that sets it.
    pub fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        path.as_deref()
            .ok_or_else(|| CliError::Usage(format!("missing --{flag} (or paths.{flag} in the config)")))
    }
}
