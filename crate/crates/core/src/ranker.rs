//! Treatment prioritization with a linear pairwise ranking SVM.
//!
//! Training minimizes
//!
//! ```text
//! L(w) = 1/2 |w|^2 + (C / P) * sum over pairs of max(0, 1 - w . (x_preferred - x_other))
//! ```
//!
//! where `P` is the total number of pairs, by stochastic subgradient descent:
//! pairs are visited in a seeded random order each epoch and the `t`-th update
//! (counted across epochs) uses step size `1 / (1 + t)`. After each update the
//! iterate is projected onto the ball `|w| <= sqrt(2C)`, which contains the
//! minimizer because `L(0) = C`. The iterate with the lowest end-of-epoch
//! objective is returned; training stops once the relative objective change
//! between epochs falls below the tolerance.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::corpus::{Certificate, Problem};
use crate::error::{Error, Result};
use crate::features::{ClassIndex, FeatureKind, FeatureVector, TokenizerScheme};
use crate::metrics::{mean_rank_correlation, RankingReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankModel {
    pub dim: usize,
    pub c_value: f64,
    pub w: Vec<f64>,
    pub feature_kind: FeatureKind,
    /// Class positions for one-of-K features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_index: Option<ClassIndex>,
    /// Token order and tokenizer for bag-of-words features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer: Option<TokenizerScheme>,
}

impl RankModel {
    pub fn new(w: Vec<f64>, c_value: f64) -> Self {
        RankModel {
            dim: w.len(),
            c_value,
            w,
            feature_kind: FeatureKind::Bow,
            class_index: None,
            vocabulary: None,
            tokenizer: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.len() != self.dim {
            return Err(Error::Format(format!(
                "ranker weight length {} differs from dim {}",
                self.w.len(),
                self.dim
            )));
        }
        if self.w.iter().any(|v| !v.is_finite()) || !self.c_value.is_finite() {
            return Err(Error::Format("ranker has non-finite values".into()));
        }
        if let Some(idx) = &self.class_index {
            if idx.len() != self.dim || !idx.is_bijection() {
                return Err(Error::Format("ranker class index does not match dim".into()));
            }
        }
        if let Some(v) = &self.vocabulary {
            if v.len() != self.dim {
                return Err(Error::Format("ranker vocabulary does not match dim".into()));
            }
        }
        Ok(())
    }
}

/// One rankable problem: an identifier for dumps, its features and gold priority.
#[derive(Debug, Clone, PartialEq)]
pub struct RankItem {
    pub id: String,
    pub x: Arc<FeatureVector>,
    pub priority: u32,
}

/// The problems of one certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct RankGroup {
    pub id: String,
    pub items: Vec<RankItem>,
}

impl RankGroup {
    /// Encodes every problem of `cert`; item ids are the problems' class ids.
    pub fn from_certificate<F>(cert: &Certificate, mut encode: F) -> Result<Self>
    where
        F: FnMut(&Problem) -> Result<FeatureVector>,
    {
        let items = cert
            .problems
            .iter()
            .map(|p| {
                Ok(RankItem {
                    id: p.class_id.clone(),
                    x: Arc::new(encode(p)?),
                    priority: p.priority,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RankGroup {
            id: cert.id.clone(),
            items,
        })
    }

    /// One pair per unordered item pair, the smaller priority number preferred.
    /// Items sharing a priority produce no pair.
    pub fn pairs(&self) -> Vec<PreferencePair> {
        let n = self.items.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&self.items[i], &self.items[j]);
                let (pref, other) = match a.priority.cmp(&b.priority) {
                    std::cmp::Ordering::Less => (a, b),
                    std::cmp::Ordering::Greater => (b, a),
                    std::cmp::Ordering::Equal => continue,
                };
                out.push(PreferencePair {
                    group_id: self.id.clone(),
                    preferred_id: pref.id.clone(),
                    other_id: other.id.clone(),
                    x_preferred: Arc::clone(&pref.x),
                    x_other: Arc::clone(&other.x),
                });
            }
        }
        out
    }

    pub fn gold_priorities(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.priority as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub group_id: String,
    pub preferred_id: String,
    pub other_id: String,
    pub x_preferred: Arc<FeatureVector>,
    pub x_other: Arc<FeatureVector>,
}

impl PreferencePair {
    /// `w . (x_preferred - x_other)`.
    pub fn margin(&self, w: &[f64]) -> f64 {
        self.x_preferred.dot(w) - self.x_other.dot(w)
    }

    /// The same preference read the other way round.
    pub fn swapped(&self) -> Self {
        PreferencePair {
            group_id: self.group_id.clone(),
            preferred_id: self.other_id.clone(),
            other_id: self.preferred_id.clone(),
            x_preferred: Arc::clone(&self.x_other),
            x_other: Arc::clone(&self.x_preferred),
        }
    }
}

/// Preference pairs of one certificate; fewer than two problems give none.
pub fn build_pairs<F>(cert: &Certificate, encode: F) -> Result<Vec<PreferencePair>>
where
    F: FnMut(&Problem) -> Result<FeatureVector>,
{
    Ok(RankGroup::from_certificate(cert, encode)?.pairs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankTrainConfig {
    pub c_grid: Vec<f64>,
    pub max_epochs: usize,
    /// Stop when the relative change of the objective between epochs drops below this.
    pub tolerance: f64,
    pub rng_seed: u64,
}

impl Default for RankTrainConfig {
    fn default() -> Self {
        RankTrainConfig {
            c_grid: vec![1.0, 5.0, 10.0, 50.0, 100.0, 500.0, 1000.0, 5000.0],
            max_epochs: 50,
            tolerance: 1e-4,
            rng_seed: 7,
        }
    }
}

impl RankTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() || self.c_grid.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "c_grid must be nonempty with positive values".into(),
            ));
        }
        if self.max_epochs == 0 || !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument(
                "max_epochs must be positive and tolerance nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankGridEntry {
    pub c_value: f64,
    pub epochs_run: usize,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub train_misordered_pairs: usize,
    pub val_mean_rho: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankGridReport {
    pub n_pairs: usize,
    pub entries: Vec<RankGridEntry>,
    pub selected_c: f64,
    pub best_val_rho: f64,
}

/// Result of minimizing the objective for a single C.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub w: Vec<f64>,
    /// Objective at `w = 0` followed by the objective after each epoch.
    pub objective_history: Vec<f64>,
    pub objective_final: f64,
}

pub fn objective(w: &[f64], pairs: &[&PreferencePair], c: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|x| x * x).sum::<f64>();
    let hinge: f64 = pairs.iter().map(|p| (1.0 - p.margin(w)).max(0.0)).sum();
    reg + c / pairs.len() as f64 * hinge
}

/// Pairs ordered the wrong way or tied by `w`.
pub fn count_misordered(w: &[f64], pairs: &[&PreferencePair]) -> usize {
    pairs.iter().filter(|p| p.margin(w) <= 0.0).count()
}

/// Pairs with a nonzero hinge term (`w . d < 1`).
pub fn count_margin_violations(w: &[f64], pairs: &[&PreferencePair]) -> usize {
    pairs.iter().filter(|p| p.margin(w) < 1.0).count()
}

fn c_seed(base: u64, c: f64) -> u64 {
    base ^ c.to_bits().rotate_left(17)
}

/// Minimizes the objective for one value of C.
pub fn fit(pairs: &[&PreferencePair], dim: usize, c: f64, cfg: &RankTrainConfig) -> Result<Fit> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no preference pairs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c_seed(cfg.rng_seed, c));
    let radius = (2.0 * c).sqrt();
    // w = scale * v keeps the shrink step O(1).
    let mut v = vec![0.0; dim];
    let mut scale = 1.0f64;
    let mut sq_norm = 0.0f64; // |v|^2
    let mut t: u64 = 0;
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    let initial = objective(&v, pairs, c);
    let mut history = vec![initial];
    let mut best_w = v.clone();
    let mut best_obj = initial;
    let mut prev = initial;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let p = pairs[k];
            let eta = 1.0 / (1.0 + t as f64);
            t += 1;
            let margin = scale * p.margin(&v);
            let shrink = 1.0 - eta;
            if shrink == 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                scale = 1.0;
                sq_norm = 0.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let a = eta * c / scale;
                // |v + a d|^2 = |v|^2 + 2a v.d + a^2 |d|^2
                let vd = p.margin(&v);
                let dd = diff_sq_norm(&p.x_preferred, &p.x_other);
                sq_norm += 2.0 * a * vd + a * a * dd;
                p.x_preferred.add_scaled_to(a, &mut v);
                p.x_other.add_scaled_to(-a, &mut v);
            }
            let norm = scale * sq_norm.max(0.0).sqrt();
            if norm > radius {
                scale *= radius / norm;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|x| *x *= scale);
                sq_norm = v.iter().map(|x| x * x).sum();
                scale = 1.0;
            }
        }
        // Refresh the running norm to stop rounding drift.
        sq_norm = v.iter().map(|x| x * x).sum();
        let w: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let obj = objective(&w, pairs, c);
        if !obj.is_finite() {
            return Err(Error::Numerical(format!("non-finite objective for C = {c}")));
        }
        history.push(obj);
        if obj <= best_obj {
            best_obj = obj;
            best_w = w;
        }
        let rel = (prev - obj).abs() / prev.abs().max(f64::MIN_POSITIVE);
        prev = obj;
        // The first epoch can land exactly on the starting objective.
        if epoch > 0 && rel < cfg.tolerance {
            break;
        }
    }
    Ok(Fit {
        w: best_w,
        objective_history: history,
        objective_final: best_obj,
    })
}

fn diff_sq_norm(a: &FeatureVector, b: &FeatureVector) -> f64 {
    match (a, b) {
        (FeatureVector::Binary { indices: ia, .. }, FeatureVector::Binary { indices: ib, .. }) => {
            // symmetric difference of the index sets
            let (mut i, mut j, mut common) = (0, 0, 0);
            while i < ia.len() && j < ib.len() {
                match ia[i].cmp(&ib[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        common += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            (ia.len() + ib.len() - 2 * common) as f64
        }
        _ => a
            .to_dense()
            .iter()
            .zip(b.to_dense())
            .map(|(x, y)| (x - y) * (x - y))
            .sum(),
    }
}

pub fn score(model: &RankModel, x: &FeatureVector) -> Result<f64> {
    if x.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            actual: x.dim(),
        });
    }
    Ok(x.dot(&model.w))
}

/// Ranks from scores: 1 for the highest, ties keep input order.
pub fn ranks_from_scores(scores: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0u32; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r as u32 + 1;
    }
    ranks
}

/// 1-based priority ranks of `items`, in input order.
pub fn rank_problems<X: AsRef<FeatureVector>>(model: &RankModel, items: &[X]) -> Result<Vec<u32>> {
    let scores = items
        .iter()
        .map(|x| score(model, x.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ranks_from_scores(&scores))
}

/// Mean Spearman rho between predicted ranks and gold priorities over `groups`.
pub fn evaluate_groups(model: &RankModel, groups: &[RankGroup]) -> Result<RankingReport> {
    let mut pred = BTreeMap::new();
    let mut gold = BTreeMap::new();
    for g in groups {
        let xs: Vec<&FeatureVector> = g.items.iter().map(|i| i.x.as_ref()).collect();
        let ranks = rank_problems(model, &xs)?;
        pred.insert(g.id.clone(), ranks.into_iter().map(f64::from).collect::<Vec<_>>());
        gold.insert(g.id.clone(), g.gold_priorities());
    }
    mean_rank_correlation(&pred, &gold)
}

/// Grid search over C. Each C is fitted independently (in parallel) and the
/// one with the highest mean validation rho wins; ties go to the earlier C.
pub fn train_rank(
    groups: &[Vec<PreferencePair>],
    validation: &[RankGroup],
    cfg: &RankTrainConfig,
) -> Result<(RankModel, RankGridReport)> {
    cfg.validate()?;
    let pairs: Vec<&PreferencePair> = groups.iter().flatten().collect();
    let first = pairs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no nonempty preference group".into()))?;
    let dim = first.x_preferred.dim();
    if dim == 0 {
        return Err(Error::EmptyVocabulary);
    }
    for p in &pairs {
        for x in [&p.x_preferred, &p.x_other] {
            if x.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: x.dim(),
                });
            }
        }
    }

    let results: Vec<(RankGridEntry, Option<Vec<f64>>)> = cfg
        .c_grid
        .par_iter()
        .map(|&c| {
            let mut entry = RankGridEntry {
                c_value: c,
                epochs_run: 0,
                objective_initial: c,
                objective_final: f64::NAN,
                train_misordered_pairs: 0,
                val_mean_rho: f64::NAN,
                failure: None,
            };
            let fitted = match fit(&pairs, dim, c, cfg) {
                Ok(f) => f,
                Err(e) => {
                    entry.failure = Some(e.to_string());
                    return (entry, None);
                }
            };
            entry.epochs_run = fitted.objective_history.len() - 1;
            entry.objective_initial = fitted.objective_history[0];
            entry.objective_final = fitted.objective_final;
            entry.train_misordered_pairs = count_misordered(&fitted.w, &pairs);
            let model = RankModel::new(fitted.w, c);
            match evaluate_groups(&model, validation) {
                Ok(r) => entry.val_mean_rho = r.mean_rho,
                Err(e) => {
                    entry.failure = Some(format!("validation: {e}"));
                    return (entry, None);
                }
            }
            (entry, Some(model.w))
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (e, w)) in results.iter().enumerate() {
        if w.is_some() && best.map_or(true, |b| e.val_mean_rho > results[b].0.val_mean_rho) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| {
        let why: Vec<String> = results
            .iter()
            .map(|(e, _)| format!("C = {}: {}", e.c_value, e.failure.as_deref().unwrap_or("?")))
            .collect();
        Error::Numerical(format!("every C failed ({})", why.join("; ")))
    })?;
    let selected_c = results[best].0.c_value;
    let best_val_rho = results[best].0.val_mean_rho;
    let mut entries = Vec::with_capacity(results.len());
    let mut w = None;
    for (i, (e, wi)) in results.into_iter().enumerate() {
        if i == best {
            w = wi;
        }
        entries.push(e);
    }
    let model = RankModel::new(w.expect("selected C has weights"), selected_c);
    Ok((
        model,
        RankGridReport {
            n_pairs: pairs.len(),
            entries,
            selected_c,
            best_val_rho,
        },
    ))
}

pub fn save_rank_model(path: &Path, model: &RankModel) -> Result<()> {
    artifact::write_json(path, "ranker", model)
}

pub fn load_rank_model(path: &Path) -> Result<RankModel> {
    let m: RankModel = artifact::read_json(path, "ranker")?;
    m.validate()?;
    Ok(m)
}

/// Writes one `group<TAB>preferred_id<TAB>other_id` line per pair after the header.
pub fn save_pairs(path: &Path, pairs: &[PreferencePair]) -> Result<()> {
    let mut s = artifact::header("pairs");
    s.push('\n');
    for p in pairs {
        s.push_str(&format!("{}\t{}\t{}\n", p.group_id, p.preferred_id, p.other_id));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dense(v: &[f64]) -> Arc<FeatureVector> {
        Arc::new(FeatureVector::Dense(v.to_vec()))
    }

    fn group(id: &str, xs: &[Vec<f64>], priorities: &[u32]) -> RankGroup {
        RankGroup {
            id: id.into(),
            items: xs
                .iter()
                .zip(priorities)
                .enumerate()
                .map(|(i, (x, &p))| RankItem {
                    id: format!("i{i}"),
                    x: dense(x),
                    priority: p,
                })
                .collect(),
        }
    }

    fn cert(n: usize) -> Certificate {
        Certificate {
            id: "c".into(),
            findings_text: String::new(),
            problems: (0..n)
                .map(|i| Problem {
                    surface_text: format!("p{i}"),
                    class_id: format!("k{i}"),
                    priority: (n - i) as u32,
                })
                .collect(),
        }
    }

    #[test]
    fn pair_counts() {
        let enc = |p: &Problem| Ok(FeatureVector::Dense(vec![p.priority as f64]));
        assert_eq!(build_pairs(&cert(3), enc).unwrap().len(), 3);
        assert_eq!(build_pairs(&cert(1), enc).unwrap().len(), 0);
        assert_eq!(build_pairs(&cert(15), enc).unwrap().len(), 105);
        for p in build_pairs(&cert(5), enc).unwrap() {
            // smaller priority number preferred
            assert!(p.x_preferred.to_dense()[0] < p.x_other.to_dense()[0]);
        }
    }

    #[test]
    fn single_pair_orients_weights() {
        let g = group("g", &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1, 2]);
        let pairs = g.pairs();
        let refs: Vec<&PreferencePair> = pairs.iter().collect();
        let f = fit(&refs, 2, 10.0, &RankTrainConfig::default()).unwrap();
        assert!(f.w[0] - f.w[1] > 0.0);
        assert!(f.objective_final <= f.objective_history[0]);
    }

    #[test]
    fn score_and_rank_basics() {
        let m = RankModel::new(vec![1.0, 0.0, 0.0], 1.0);
        assert_eq!(score(&m, &FeatureVector::zeros(3)).unwrap(), 0.0);
        assert_eq!(score(&m, &FeatureVector::Dense(vec![1.0, 0.0, 0.0])).unwrap(), 1.0);
        assert!(score(&m, &FeatureVector::zeros(2)).is_err());
        assert_eq!(ranks_from_scores(&[0.9, 0.1, 0.5]), vec![1, 3, 2]);
        assert_eq!(ranks_from_scores(&[0.2; 4]), vec![1, 2, 3, 4]);
    }

    #[test]
    fn score_matches_dot_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let w: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut oracle = 0.0;
            for i in 0..16 {
                oracle += w[i] * x[i];
            }
            let m = RankModel::new(w, 1.0);
            assert!((score(&m, &FeatureVector::Dense(x)).unwrap() - oracle).abs() < 1e-12);
        }
    }

    fn random_groups(seed: u64, n_groups: usize, dim: usize, w_star: &[f64]) -> Vec<RankGroup> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_groups)
            .map(|g| {
                let xs: Vec<Vec<f64>> = (0..6)
                    .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let scores: Vec<f64> = xs
                    .iter()
                    .map(|x| x.iter().zip(w_star).map(|(a, b)| a * b).sum())
                    .collect();
                let pr = ranks_from_scores(&scores);
                group(&format!("g{g}"), &xs, &pr)
            })
            .collect()
    }

    #[test]
    fn antisymmetry_under_swapped_pairs() {
        let w_star = [2.0, -1.0, 0.5];
        let groups = random_groups(3, 10, 3, &w_star);
        let pairs: Vec<PreferencePair> = groups.iter().flat_map(|g| g.pairs()).collect();
        let swapped: Vec<PreferencePair> = pairs.iter().map(|p| p.swapped()).collect();
        let cfg = RankTrainConfig::default();
        let a = fit(&pairs.iter().collect::<Vec<_>>(), 3, 5.0, &cfg).unwrap();
        let b = fit(&swapped.iter().collect::<Vec<_>>(), 3, 5.0, &cfg).unwrap();
        for (x, y) in a.w.iter().zip(&b.w) {
            assert!((x + y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn grid_bookkeeping_and_determinism() {
        let w_star = [1.0, 2.0, -1.0, 0.0];
        let tr = random_groups(5, 30, 4, &w_star);
        let va = random_groups(6, 10, 4, &w_star);
        let pairs: Vec<Vec<PreferencePair>> = tr.iter().map(|g| g.pairs()).collect();
        let cfg = RankTrainConfig::default();
        let (m, r) = train_rank(&pairs, &va, &cfg).unwrap();
        assert_eq!(r.entries.len(), 8);
        let max = r.entries.iter().map(|e| e.val_mean_rho).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best_val_rho, max);
        assert_eq!(m.c_value, r.selected_c);
        for e in &r.entries {
            assert!(e.objective_final <= e.objective_initial);
        }
        let (m2, r2) = train_rank(&pairs, &va, &cfg).unwrap();
        assert_eq!(m, m2);
        assert_eq!(r, r2);
    }

    #[test]
    fn rejects_empty_and_mismatched_input() {
        let cfg = RankTrainConfig::default();
        assert!(train_rank(&[vec![]], &[], &cfg).is_err());
        let g1 = group("a", &[vec![1.0], vec![0.0]], &[1, 2]);
        let g2 = group("b", &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1, 2]);
        assert!(matches!(
            train_rank(&[g1.pairs(), g2.pairs()], &[g1.clone()], &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = RankTrainConfig { c_grid: vec![0.0], ..cfg };
        assert!(train_rank(&[g1.pairs()], &[g1], &bad).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.model");
        let mut m = RankModel::new(vec![0.25, -1.5, 3.0], 50.0);
        m.feature_kind = FeatureKind::Ook;
        m.class_index = Some(ClassIndex::from_classes(["a", "b", "c"]));
        save_rank_model(&path, &m).unwrap();
        assert_eq!(load_rank_model(&path).unwrap(), m);
        std::fs::write(&path, "orthoplan-ranker v1\n{\"dim\": 3").unwrap();
        assert!(matches!(load_rank_model(&path), Err(Error::Format(_))));
    }

    #[test]
    fn pair_dump_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        let g = group("cert1", &[vec![0.0], vec![1.0]], &[2, 1]);
        save_pairs(&path, &g.pairs()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "orthoplan-pairs v1\ncert1\ti1\ti0\n");
    }

    proptest! {
        #[test]
        fn ranks_are_a_permutation(scores in proptest::collection::vec(-5i32..5, 1..30)) {
            let s: Vec<f64> = scores.iter().map(|&x| x as f64).collect();
            let mut r = ranks_from_scores(&s);
            r.sort();
            prop_assert_eq!(r, (1..=s.len() as u32).collect::<Vec<_>>());
        }

        #[test]
        fn positive_scaling_keeps_ranking(
            w in proptest::collection::vec(-3.0f64..3.0, 4),
            xs in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..10),
            lambda in 0.01f64..100.0,
        ) {
            let m = RankModel::new(w, 1.0);
            let items: Vec<FeatureVector> = xs.into_iter().map(FeatureVector::Dense).collect();
            let scaled: Vec<FeatureVector> = items.iter().map(|x| x.scaled(lambda)).collect();
            let a = rank_problems(&m, &items).unwrap();
            let b = rank_problems(&m, &scaled).unwrap();
            // exact score ties may resolve differently after rounding; compare
            // only when all scores are well separated
            let s: Vec<f64> = items.iter().map(|x| score(&m, x).unwrap()).collect();
            let separated = s.iter().enumerate().all(|(i, a)| s[i + 1..].iter().all(|b| (a - b).abs() > 1e-9));
            if separated {
                prop_assert_eq!(a, b);
            }
        }
    }
}
