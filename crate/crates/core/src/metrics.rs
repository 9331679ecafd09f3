//! Multi-label precision/recall/F1 and Spearman rank correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Spearman rho above which a ranker is read as positively correlated
/// with the human ranking (strictly greater).
pub const POSITIVE_CORRELATION_THRESHOLD: f64 = 0.4;

pub type LabelSets = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingMode {
    /// Per-document precision, recall and F1, each averaged over documents.
    #[default]
    ExampleBased,
    /// Counts pooled over all documents.
    Micro,
}

impl fmt::Display for AveragingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AveragingMode::ExampleBased => "example_based",
            AveragingMode::Micro => "micro",
        })
    }
}

/// Scores used where a ratio has a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmptyConvention {
    /// Precision, recall and F1 when prediction and gold are both empty.
    pub both_empty: f64,
    /// Precision when the prediction is empty, recall when the gold set is.
    pub zero_division: f64,
}

impl Default for EmptyConvention {
    fn default() -> Self {
        EmptyConvention {
            both_empty: 1.0,
            zero_division: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mode: AveragingMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_document: Option<Vec<DocumentScore>>,
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratios(tp: usize, n_pred: usize, n_gold: usize, conv: &EmptyConvention) -> (f64, f64, f64) {
    if n_pred == 0 && n_gold == 0 {
        let s = conv.both_empty;
        return (s, s, s);
    }
    let p = if n_pred == 0 {
        conv.zero_division
    } else {
        tp as f64 / n_pred as f64
    };
    let r = if n_gold == 0 {
        conv.zero_division
    } else {
        tp as f64 / n_gold as f64
    };
    (p, r, harmonic_mean(p, r))
}

fn check_keys<A, B>(pred: &BTreeMap<String, A>, gold: &BTreeMap<String, B>) -> Result<()> {
    if pred.len() != gold.len() || pred.keys().zip(gold.keys()).any(|(a, b)| a != b) {
        let missing: Vec<&String> = gold.keys().filter(|k| !pred.contains_key(*k)).collect();
        let extra: Vec<&String> = pred.keys().filter(|k| !gold.contains_key(*k)).collect();
        return Err(Error::InvalidArgument(format!(
            "prediction and gold documents differ (missing {missing:?}, extra {extra:?})"
        )));
    }
    Ok(())
}

pub fn prf1(predictions: &LabelSets, gold: &LabelSets, mode: AveragingMode) -> Result<ClassificationReport> {
    prf1_with(predictions, gold, mode, &EmptyConvention::default())
}

pub fn prf1_with(
    predictions: &LabelSets,
    gold: &LabelSets,
    mode: AveragingMode,
    conv: &EmptyConvention,
) -> Result<ClassificationReport> {
    check_keys(predictions, gold)?;
    match mode {
        AveragingMode::ExampleBased => {
            let docs: Vec<DocumentScore> = gold
                .iter()
                .map(|(id, g)| {
                    let p = &predictions[id];
                    let tp = p.intersection(g).count();
                    let (precision, recall, f1) = ratios(tp, p.len(), g.len(), conv);
                    DocumentScore {
                        id: id.clone(),
                        precision,
                        recall,
                        f1,
                    }
                })
                .collect();
            let n = docs.len().max(1) as f64;
            let mean = |f: fn(&DocumentScore) -> f64| docs.iter().map(f).sum::<f64>() / n;
            Ok(ClassificationReport {
                precision: mean(|d| d.precision),
                recall: mean(|d| d.recall),
                f1: mean(|d| d.f1),
                mode,
                per_document: Some(docs),
            })
        }
        AveragingMode::Micro => {
            let (mut tp, mut np, mut ng) = (0, 0, 0);
            for (id, g) in gold {
                let p = &predictions[id];
                tp += p.intersection(g).count();
                np += p.len();
                ng += g.len();
            }
            let (precision, recall, f1) = ratios(tp, np, ng, conv);
            Ok(ClassificationReport {
                precision,
                recall,
                f1,
                mode,
                per_document: None,
            })
        }
    }
}

/// 1-based ranks with ties sharing the mean of the positions they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share their mean
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::InvalidArgument("zero variance in rank vector".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of fractional ranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spearman_rho needs at least 2 items, got {}",
            a.len()
        )));
    }
    pearson(&fractional_ranks(a), &fractional_ranks(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub mean_rho: f64,
    pub per_document: Vec<(String, f64)>,
    pub n_excluded: usize,
    /// `mean_rho > POSITIVE_CORRELATION_THRESHOLD`.
    pub positive_correlation: bool,
}

impl RankingReport {
    pub fn from_rhos(per_document: Vec<(String, f64)>, n_excluded: usize) -> Result<Self> {
        if per_document.is_empty() {
            return Err(Error::InvalidArgument(
                "no document with at least two distinctly ranked items".into(),
            ));
        }
        let mean_rho = per_document.iter().map(|(_, r)| r).sum::<f64>() / per_document.len() as f64;
        Ok(RankingReport {
            mean_rho,
            per_document,
            n_excluded,
            positive_correlation: mean_rho > POSITIVE_CORRELATION_THRESHOLD,
        })
    }
}

/// Mean per-document Spearman rho. Documents with fewer than two items or a
/// constant rank vector are skipped and counted in `n_excluded`.
pub fn mean_rank_correlation(
    predicted: &BTreeMap<String, Vec<f64>>,
    gold: &BTreeMap<String, Vec<f64>>,
) -> Result<RankingReport> {
    check_keys(predicted, gold)?;
    let mut rhos = Vec::with_capacity(gold.len());
    let mut excluded = 0;
    for (id, g) in gold {
        let p = &predicted[id];
        if p.len() != g.len() {
            return Err(Error::InvalidArgument(format!(
                "document {id:?}: {} predicted ranks vs {} gold ranks",
                p.len(),
                g.len()
            )));
        }
        match spearman_rho(p, g) {
            Ok(r) => rhos.push((id.clone(), r)),
            Err(_) => excluded += 1,
        }
    }
    RankingReport::from_rhos(rhos, excluded)
}
