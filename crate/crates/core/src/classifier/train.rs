use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Activation, Example, Gradients, MlpModel};
use crate::error::{Error, Result};
use crate::features::{ClassIndex, FeatureKind};
use crate::metrics::{prf1, AveragingMode, ClassificationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain mini-batch gradient descent with a fixed step.
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_grid: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation F1 improvement before stopping.
    pub patience: usize,
    pub decision_threshold: f64,
    pub optimizer: Optimizer,
    pub hidden_activation: Activation,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_grid: vec![256, 512, 1024, 2048, 4096],
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            decision_threshold: 0.5,
            optimizer: Optimizer::Adam,
            hidden_activation: Activation::Relu,
            rng_seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.hidden_grid.is_empty() || self.hidden_grid.contains(&0) {
            return bad("hidden_grid must be nonempty with positive sizes");
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad("decision_threshold must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        Ok(())
    }
}

/// Outcome of one hidden size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub hidden_dim: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub entries: Vec<GridEntry>,
    pub selected_hidden_dim: usize,
    pub best_val_f1: f64,
}

/// Predicted label sets for `examples`, keyed by position.
pub fn predict_sets(model: &MlpModel, examples: &[Example], threshold: f64) -> Result<BTreeMap<String, BTreeSet<String>>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| Ok((i.to_string(), model.predict_labels(&ex.x, threshold)?)))
        .collect()
}

fn target_sets(index: &ClassIndex, examples: &[Example]) -> BTreeMap<String, BTreeSet<String>> {
    let classes = index.classes();
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let set = ex
                .y
                .iter()
                .zip(&classes)
                .filter(|(&t, _)| t == 1.0)
                .map(|(_, c)| c.to_string())
                .collect();
            (i.to_string(), set)
        })
        .collect()
}

/// Example-based P/R/F1 of `model` on `examples`, judged against their target vectors.
pub fn evaluate_examples(model: &MlpModel, examples: &[Example], threshold: f64) -> Result<ClassificationReport> {
    let pred = predict_sets(model, examples, threshold)?;
    let gold = target_sets(&model.label_index, examples);
    prf1(&pred, &gold, AveragingMode::ExampleBased)
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

fn apply_update(model: &mut MlpModel, g: &Gradients, cfg: &TrainConfig, adam: &mut AdamState) {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let lr = cfg.learning_rate;
    adam.t += 1;
    let (c1, c2) = (1.0 - B1.powi(adam.t), 1.0 - B2.powi(adam.t));
    for (slot, (param, grad)) in model.params_mut().into_iter().zip(g.slices()).enumerate() {
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, gi) in param.iter_mut().zip(grad) {
                    *p -= lr * gi;
                }
            }
            Optimizer::Adam => {
                let (m, v) = (&mut adam.m[slot], &mut adam.v[slot]);
                for i in 0..param.len() {
                    let gi = grad[i];
                    if gi == 0.0 && m[i] == 0.0 && v[i] == 0.0 {
                        continue;
                    }
                    m[i] = B1 * m[i] + (1.0 - B1) * gi;
                    v[i] = B2 * v[i] + (1.0 - B2) * gi * gi;
                    param[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
                }
            }
        }
    }
}

fn grid_seed(base: u64, hidden: usize) -> u64 {
    base ^ (hidden as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn train_one(
    train: &[Example],
    validation: &[Example],
    label_index: &ClassIndex,
    input_dim: usize,
    hidden: usize,
    cfg: &TrainConfig,
) -> (GridEntry, Option<MlpModel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(grid_seed(cfg.rng_seed, hidden));
    let mut model = MlpModel::init(input_dim, hidden, label_index.clone(), cfg.hidden_activation, &mut rng);
    let mut adam = AdamState {
        m: model.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        v: model.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        t: 0,
    };
    let mut entry = GridEntry {
        hidden_dim: hidden,
        epochs_run: 0,
        best_epoch: 0,
        precision: 0.0,
        recall: 0.0,
        f1: f64::NEG_INFINITY,
        failure: None,
    };
    let mut best: Option<MlpModel> = None;
    let mut best_val_loss = f64::INFINITY;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            // dims were checked up front
            let g = model.gradients(&batch).expect("consistent dimensions");
            apply_update(&mut model, &g, cfg, &mut adam);
        }
        entry.epochs_run = epoch;

        let loss = model.mean_loss(train).unwrap_or(f64::NAN);
        if !loss.is_finite() || model.validate().is_err() {
            entry.failure = Some(format!("non-finite loss at epoch {epoch}"));
            return (entry, None);
        }
        let report = match evaluate_examples(&model, validation, cfg.decision_threshold) {
            Ok(r) => r,
            Err(e) => {
                entry.failure = Some(e.to_string());
                return (entry, None);
            }
        };
        // Equal F1 falls back to validation loss.
        let val_loss = model.mean_loss(validation).unwrap_or(f64::INFINITY);
        if report.f1 > entry.f1 || (report.f1 == entry.f1 && val_loss < best_val_loss) {
            best_val_loss = val_loss;
            entry.f1 = report.f1;
            entry.precision = report.precision;
            entry.recall = report.recall;
            entry.best_epoch = epoch;
            best = Some(model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
        log::debug!("hidden {hidden} epoch {epoch}: loss {loss:.5} val f1 {:.4}", report.f1);
    }
    (entry, best)
}

fn check_examples(examples: &[Example], input_dim: usize, n_labels: usize, what: &str) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument(format!("empty {what} set")));
    }
    for ex in examples {
        if ex.x.dim() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                actual: ex.x.dim(),
            });
        }
        if ex.y.len() != n_labels {
            return Err(Error::DimensionMismatch {
                expected: n_labels,
                actual: ex.y.len(),
            });
        }
        if !ex.x.is_finite() || ex.y.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "{what} set has non-finite features or non-binary targets"
            )));
        }
    }
    Ok(())
}

/// Grid search over hidden sizes with early stopping on validation
/// example-based F1. Grid points train in parallel; each has its own
/// generator seeded from `cfg.rng_seed` and the hidden size, so results do
/// not depend on scheduling. Ties in F1 go to the earlier grid entry.
pub fn train(
    train: &[Example],
    validation: &[Example],
    label_index: &ClassIndex,
    feature_kind: FeatureKind,
    cfg: &TrainConfig,
) -> Result<(MlpModel, GridReport)> {
    cfg.validate()?;
    if label_index.is_empty() {
        return Err(Error::InvalidArgument("no labels to learn".into()));
    }
    let input_dim = train.first().map(|e| e.x.dim()).unwrap_or(0);
    if input_dim == 0 {
        return Err(Error::EmptyVocabulary);
    }
    check_examples(train, input_dim, label_index.len(), "training")?;
    check_examples(validation, input_dim, label_index.len(), "validation")?;

    let results: Vec<(GridEntry, Option<MlpModel>)> = cfg
        .hidden_grid
        .par_iter()
        .map(|&h| train_one(train, validation, label_index, input_dim, h, cfg))
        .collect();

    let mut selected: Option<(usize, f64)> = None;
    for (i, (entry, model)) in results.iter().enumerate() {
        if entry.failure.is_none() && model.is_some() && selected.is_none_or(|(_, f)| entry.f1 > f) {
            selected = Some((i, entry.f1));
        }
    }
    let (best_i, best_f1) = selected.ok_or_else(|| {
        let why: Vec<String> = results
            .iter()
            .map(|(e, _)| format!("hidden {}: {}", e.hidden_dim, e.failure.as_deref().unwrap_or("no model")))
            .collect();
        Error::Numerical(format!("every grid point failed ({})", why.join("; ")))
    })?;
    let mut entries = Vec::with_capacity(results.len());
    let mut chosen = None;
    for (i, (entry, model)) in results.into_iter().enumerate() {
        if i == best_i {
            chosen = model;
        }
        entries.push(entry);
    }
    let model = chosen.expect("selected entry has a model").with_feature_kind(feature_kind);
    let report = GridReport {
        selected_hidden_dim: model.hidden_dim,
        best_val_f1: best_f1,
        entries,
    };
    Ok((model, report))
}
