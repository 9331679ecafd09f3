//! Keyword-injection generator for synthetic certificates.
//!
//! Labels are `g0 .. g{n-1}`. Each label owns the keyword tokens
//! `kw_<label>_0 .. kw_<label>_{k-1}`; a certificate's findings text has one
//! bullet line per gold label carrying all of that label's keywords plus a few
//! filler tokens `w<i>` drawn from a shared pool. Lines are shuffled. With
//! probability `label_noise_rate` a gold label's line is left out of the text
//! while the label stays gold.
//!
//! Priorities follow descending `severity(label) + priority_noise * N(0, 1)`,
//! ties broken by ascending class id.
//!
//! When `n_fine_labels` is set the catalog also carries fine ids
//! `f0 .. f{m-1}` grouped many-to-one onto the `g` labels, and every problem is
//! annotated with a fine id from its label's group. Keywords stay per group.

use std::collections::BTreeMap;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Certificate, LabelCatalog, Problem};
use crate::error::{Error, Result};

const MODIFIERS: [&str; 4] = ["noted", "mild", "moderate", "marked"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_certificates: usize,
    pub n_labels: usize,
    pub keywords_per_label: usize,
    pub problems_per_cert_mean: f64,
    pub label_noise_rate: f64,
    /// Standard deviation of the per-problem perturbation added to severity
    /// before priorities are assigned.
    pub priority_noise: f64,
    pub filler_per_label: usize,
    pub filler_vocab: usize,
    pub n_fine_labels: Option<usize>,
    /// Priority utility per grouped label; labels missing here get a value
    /// from a seeded permutation of `1/n, 2/n, ..., 1`.
    pub severity: BTreeMap<String, f64>,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_certificates: 990,
            n_labels: 151,
            keywords_per_label: 3,
            problems_per_cert_mean: 15.4,
            label_noise_rate: 0.0,
            priority_noise: 0.0,
            filler_per_label: 2,
            filler_vocab: 50,
            n_fine_labels: None,
            severity: BTreeMap::new(),
            rng_seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_certificates == 0 {
            return bad("n_certificates must be positive".into());
        }
        if self.n_labels < 2 {
            return bad(format!("n_labels must be at least 2, got {}", self.n_labels));
        }
        if self.keywords_per_label == 0 {
            return bad("keywords_per_label must be positive".into());
        }
        if !(self.problems_per_cert_mean > 0.0) || !self.problems_per_cert_mean.is_finite() {
            return bad(format!(
                "problems_per_cert_mean must be positive, got {}",
                self.problems_per_cert_mean
            ));
        }
        if !(0.0..=1.0).contains(&self.label_noise_rate) {
            return bad(format!(
                "label_noise_rate must lie in [0, 1], got {}",
                self.label_noise_rate
            ));
        }
        if !(self.priority_noise >= 0.0) || !self.priority_noise.is_finite() {
            return bad(format!(
                "priority_noise must be nonnegative, got {}",
                self.priority_noise
            ));
        }
        if self.filler_per_label > 0 && self.filler_vocab == 0 {
            return bad("filler_vocab must be positive when filler tokens are requested".into());
        }
        if let Some(m) = self.n_fine_labels {
            if m < self.n_labels {
                return bad(format!(
                    "n_fine_labels ({m}) must be at least n_labels ({})",
                    self.n_labels
                ));
            }
        }
        if let Some((k, v)) = self.severity.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("severity of {k:?} is not finite: {v}"));
        }
        Ok(())
    }
}

pub fn label_id(j: usize) -> String {
    format!("g{j}")
}

pub fn keyword_token(label: &str, i: usize) -> String {
    format!("kw_{label}_{i}")
}

pub fn filler_token(i: usize) -> String {
    format!("w{i}")
}

fn class_name(class_id: &str) -> String {
    format!("sx_{class_id}")
}

/// Generates a corpus and its catalog; a pure function of `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(Vec<Certificate>, LabelCatalog)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let n = spec.n_labels;
    let labels: Vec<String> = (0..n).map(label_id).collect();

    let mut default_severity: Vec<f64> = (1..=n).map(|j| j as f64 / n as f64).collect();
    default_severity.shuffle(&mut rng);
    let severity: Vec<f64> = labels
        .iter()
        .zip(&default_severity)
        .map(|(l, &d)| spec.severity.get(l).copied().unwrap_or(d))
        .collect();

    let mut classes = BTreeMap::new();
    let mut grouping = BTreeMap::new();
    for l in &labels {
        classes.insert(l.clone(), class_name(l));
    }
    // members[j] lists the class ids a problem of label j may carry.
    let mut members: Vec<Vec<String>> = labels.iter().map(|l| vec![l.clone()]).collect();
    if let Some(m) = spec.n_fine_labels {
        for m_ in members.iter_mut() {
            m_.clear();
        }
        for k in 0..m {
            let g = if k < n { k } else { rng.random_range(0..n) };
            let f = format!("f{k}");
            classes.insert(f.clone(), class_name(&f));
            grouping.insert(f.clone(), labels[g].clone());
            members[g].push(f);
        }
        for l in &labels {
            grouping.insert(l.clone(), l.clone());
        }
    }
    let catalog = LabelCatalog::new(classes, grouping)?;

    let extra = spec.problems_per_cert_mean - 1.0;
    let poisson = if extra > 0.0 {
        Some(Poisson::new(extra).map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let width = spec.n_certificates.to_string().len().max(4);

    let mut corpus = Vec::with_capacity(spec.n_certificates);
    for i in 0..spec.n_certificates {
        let count = match &poisson {
            Some(p) => loop {
                let k = 1 + p.sample(&mut rng) as usize;
                if k <= n {
                    break k;
                }
            },
            None => 1,
        };
        let mut chosen = index::sample(&mut rng, n, count).into_vec();
        chosen.sort_unstable();

        struct Draft {
            label: usize,
            class_id: String,
            surface_text: String,
            score: f64,
        }
        let mut drafts = Vec::with_capacity(count);
        let mut lines = Vec::with_capacity(count);
        for &j in &chosen {
            let class_id = members[j]
                .choose(&mut rng)
                .expect("every label has at least one class")
                .clone();
            let z: f64 = rng.sample(StandardNormal);
            let modifier = MODIFIERS[rng.random_range(0..MODIFIERS.len())];
            let dropped = rng.random::<f64>() < spec.label_noise_rate;

            let mut tokens: Vec<String> = (0..spec.keywords_per_label)
                .map(|t| keyword_token(&labels[j], t))
                .collect();
            for _ in 0..spec.filler_per_label {
                tokens.push(filler_token(rng.random_range(0..spec.filler_vocab)));
            }
            if !dropped {
                lines.push(format!("- {}", tokens.join(" ")));
            }
            drafts.push(Draft {
                label: j,
                surface_text: format!("{} {modifier}", class_name(&class_id)),
                class_id,
                score: severity[j] + spec.priority_noise * z,
            });
        }
        lines.shuffle(&mut rng);

        drafts.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.class_id.cmp(&b.class_id))
                .then_with(|| a.label.cmp(&b.label))
        });
        let problems = drafts
            .into_iter()
            .enumerate()
            .map(|(rank, d)| Problem {
                surface_text: d.surface_text,
                class_id: d.class_id,
                priority: rank as u32 + 1,
            })
            .collect();
        corpus.push(Certificate {
            id: format!("syn{i:0width$}"),
            findings_text: lines.join("\n"),
            problems,
        });
    }
    Ok((corpus, catalog))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{apply_grouping, corpus_stats, parse_corpus, corpus_to_string};

    fn small() -> SynthSpec {
        SynthSpec {
            n_certificates: 60,
            n_labels: 12,
            problems_per_cert_mean: 4.0,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn zero_noise_text_contains_all_keywords() {
        let (corpus, _) = generate_synthetic(&small()).unwrap();
        for cert in &corpus {
            let tokens: Vec<&str> = cert.findings_text.split_whitespace().collect();
            for p in &cert.problems {
                for t in 0..3 {
                    let kw = keyword_token(&p.class_id, t);
                    assert!(tokens.contains(&kw.as_str()), "{kw} missing in {}", cert.id);
                }
            }
        }
    }

    #[test]
    fn noise_drops_keywords() {
        let spec = SynthSpec {
            label_noise_rate: 1.0,
            ..small()
        };
        let (corpus, _) = generate_synthetic(&spec).unwrap();
        assert!(corpus.iter().all(|c| c.findings_text.is_empty()));
        assert!(corpus.iter().all(|c| !c.problems.is_empty()));
    }

    #[test]
    fn priorities_follow_severity_without_noise() {
        let mut spec = small();
        for j in 0..spec.n_labels {
            spec.severity.insert(label_id(j), (100 - j) as f64);
        }
        let (corpus, _) = generate_synthetic(&spec).unwrap();
        for cert in &corpus {
            let order: Vec<usize> = cert
                .problems_by_priority()
                .iter()
                .map(|p| p.class_id[1..].parse().unwrap())
                .collect();
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(order, sorted, "{}", cert.id);
        }
    }

    #[test]
    fn generation_is_pure_and_round_trips() {
        let (a, ca) = generate_synthetic(&small()).unwrap();
        let (b, cb) = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        assert_eq!(parse_corpus(&corpus_to_string(&a)).unwrap(), a);

        let other = SynthSpec {
            rng_seed: 8,
            ..small()
        };
        assert_ne!(generate_synthetic(&other).unwrap().0, a);
    }

    #[test]
    fn fine_labels_group_back() {
        let spec = SynthSpec {
            n_fine_labels: Some(30),
            ..small()
        };
        let (corpus, cat) = generate_synthetic(&spec).unwrap();
        assert!(corpus
            .iter()
            .flat_map(|c| &c.problems)
            .all(|p| p.class_id.starts_with('f')));
        assert_eq!(cat.grouped_ids().len(), 12);
        let grouped = apply_grouping(&corpus, &cat).unwrap();
        assert!(grouped
            .iter()
            .flat_map(|c| &c.problems)
            .all(|p| p.class_id.starts_with('g')));
        assert!(corpus_stats(&grouped).unwrap().distinct_labels <= 12);
    }

    #[test]
    fn rejects_invalid_specs() {
        for spec in [
            SynthSpec { n_labels: 1, ..small() },
            SynthSpec { label_noise_rate: 1.5, ..small() },
            SynthSpec { problems_per_cert_mean: 0.0, ..small() },
            SynthSpec { n_fine_labels: Some(3), ..small() },
        ] {
            assert!(generate_synthetic(&spec).is_err());
        }
    }
}
