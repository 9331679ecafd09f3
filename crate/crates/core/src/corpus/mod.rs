//! Certificates, label catalogs and the line-delimited corpus format.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id":"c0001","findings_text":"...","problems":[{"surface_text":"...","class_id":"g3","priority":1}]}
//! ```
//!
//! Field order on output is fixed (`id`, `findings_text`, `problems`, and
//! `surface_text`, `class_id`, `priority` inside each problem) with no
//! insignificant whitespace, so `save_corpus(load_corpus(f))` reproduces any
//! file already in canonical form byte for byte. Blank lines are ignored on
//! input. Unknown fields are rejected.

mod split;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{load_split, save_split, split_corpus, split_sizes, Split};
pub use synth::{filler_token, generate_synthetic, keyword_token, SynthSpec};

/// One orthodontic problem as annotated on a certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub surface_text: String,
    pub class_id: String,
    /// 1 is treated first.
    pub priority: u32,
}

/// One patient record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub id: String,
    pub findings_text: String,
    pub problems: Vec<Problem>,
}

impl Certificate {
    /// Checks the per-record invariants: nonempty id and class ids, and
    /// priorities that are distinct positive integers.
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Format("certificate with empty id".into()));
        }
        let mut seen = HashSet::with_capacity(self.problems.len());
        for p in &self.problems {
            if p.class_id.is_empty() {
                return Err(Error::Priority {
                    id: self.id.clone(),
                    message: "problem with empty class_id".into(),
                });
            }
            if p.priority == 0 {
                return Err(Error::Priority {
                    id: self.id.clone(),
                    message: "nonpositive priority 0".into(),
                });
            }
            if !seen.insert(p.priority) {
                return Err(Error::Priority {
                    id: self.id.clone(),
                    message: format!("duplicate priority {}", p.priority),
                });
            }
        }
        Ok(())
    }

    pub fn label_set(&self) -> BTreeSet<String> {
        self.problems.iter().map(|p| p.class_id.clone()).collect()
    }

    /// Problems sorted by ascending priority number.
    pub fn problems_by_priority(&self) -> Vec<&Problem> {
        let mut v: Vec<&Problem> = self.problems.iter().collect();
        v.sort_by_key(|p| p.priority);
        v
    }
}

// Wire form of a problem. Priority is read signed so a negative value is
// reported as a priority violation rather than a type error.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    surface_text: String,
    class_id: String,
    priority: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    id: String,
    findings_text: String,
    problems: Vec<RawProblem>,
}

impl RawCertificate {
    fn into_certificate(self) -> Result<Certificate> {
        let mut problems = Vec::with_capacity(self.problems.len());
        for p in self.problems {
            if p.priority < 1 || p.priority > u32::MAX as i64 {
                return Err(Error::Priority {
                    id: self.id.clone(),
                    message: format!("nonpositive priority {}", p.priority),
                });
            }
            problems.push(Problem {
                surface_text: p.surface_text,
                class_id: p.class_id,
                priority: p.priority as u32,
            });
        }
        Ok(Certificate {
            id: self.id,
            findings_text: self.findings_text,
            problems,
        })
    }
}

/// Parses corpus text in the line-delimited format.
pub fn parse_corpus(text: &str) -> Result<Vec<Certificate>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawCertificate = serde_json::from_str(line).map_err(|e| Error::parse(lineno, e))?;
        let cert = raw.into_certificate()?;
        cert.validate()?;
        if !ids.insert(cert.id.clone()) {
            return Err(Error::DuplicateId(cert.id));
        }
        out.push(cert);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Certificate>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub fn corpus_to_string(corpus: &[Certificate]) -> String {
    let mut s = String::new();
    for cert in corpus {
        // Serializing plain strings and integers cannot fail.
        s.push_str(&serde_json::to_string(cert).expect("certificate serializes"));
        s.push('\n');
    }
    s
}

pub fn save_corpus(path: &Path, corpus: &[Certificate]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(corpus_to_string(corpus).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Problem-class inventory with a many-to-one grouping onto coarse classes.
///
/// `group(c)` is `grouping[c]` when present and `c` itself otherwise, so the
/// grouped ids must map to themselves.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelCatalog {
    pub classes: BTreeMap<String, String>,
    pub grouping: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogRecord {
    class_id: String,
    name: String,
    grouped_id: String,
}

impl LabelCatalog {
    pub fn new(
        classes: BTreeMap<String, String>,
        grouping: BTreeMap<String, String>,
    ) -> Result<Self> {
        let cat = LabelCatalog { classes, grouping };
        cat.validate()?;
        Ok(cat)
    }

    /// Catalog whose grouping is the identity on `ids`; names equal ids.
    pub fn identity<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let classes = ids
            .into_iter()
            .map(|s| {
                let s = s.into();
                (s.clone(), s)
            })
            .collect();
        LabelCatalog {
            classes,
            grouping: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (fine, coarse) in &self.grouping {
            if !self.classes.contains_key(coarse) {
                return Err(Error::Catalog(format!(
                    "{fine:?} groups to {coarse:?}, which is not a known class"
                )));
            }
            if let Some(next) = self.grouping.get(coarse) {
                if next != coarse {
                    return Err(Error::Catalog(format!(
                        "grouping is not idempotent: {fine:?} -> {coarse:?} -> {next:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, class_id: &str) -> bool {
        self.classes.contains_key(class_id) || self.grouping.contains_key(class_id)
    }

    /// Grouped id of `class_id`, or `None` if the catalog does not know it.
    pub fn group<'a>(&'a self, class_id: &'a str) -> Option<&'a str> {
        match self.grouping.get(class_id) {
            Some(g) => Some(g.as_str()),
            None if self.classes.contains_key(class_id) => Some(class_id),
            None => None,
        }
    }

    pub fn name(&self, class_id: &str) -> Option<&str> {
        self.classes.get(class_id).map(String::as_str)
    }

    /// The distinct ids that remain after grouping.
    pub fn grouped_ids(&self) -> BTreeSet<&str> {
        self.classes
            .keys()
            .filter_map(|c| self.group(c))
            .collect()
    }

    /// Fails on the first class id in `corpus` this catalog cannot resolve.
    pub fn check_corpus(&self, corpus: &[Certificate]) -> Result<()> {
        for cert in corpus {
            for p in &cert.problems {
                if !self.contains(&p.class_id) {
                    return Err(Error::UnmappedClass(p.class_id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut classes = BTreeMap::new();
        let mut grouping = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CatalogRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e))?;
            if rec.class_id.is_empty() || rec.grouped_id.is_empty() {
                return Err(Error::parse(i + 1, "empty class_id or grouped_id"));
            }
            if classes.insert(rec.class_id.clone(), rec.name).is_some() {
                return Err(Error::parse(
                    i + 1,
                    format!("duplicate class_id {:?}", rec.class_id),
                ));
            }
            grouping.insert(rec.class_id, rec.grouped_id);
        }
        LabelCatalog::new(classes, grouping)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (class_id, name) in &self.classes {
            let rec = CatalogRecord {
                class_id: class_id.clone(),
                name: name.clone(),
                grouped_id: self.group(class_id).unwrap_or(class_id).to_string(),
            };
            s.push_str(&serde_json::to_string(&rec).expect("catalog record serializes"));
            s.push('\n');
        }
        s
    }
}

pub fn load_catalog(path: &Path) -> Result<LabelCatalog> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LabelCatalog::parse(&text)
}

pub fn save_catalog(path: &Path, catalog: &LabelCatalog) -> Result<()> {
    fs::write(path, catalog.to_text()).map_err(|e| Error::io(path, e))
}

/// Replaces every problem's class id with its grouped id.
pub fn apply_grouping(corpus: &[Certificate], catalog: &LabelCatalog) -> Result<Vec<Certificate>> {
    corpus
        .iter()
        .map(|cert| {
            let problems = cert
                .problems
                .iter()
                .map(|p| {
                    let g = catalog
                        .group(&p.class_id)
                        .ok_or_else(|| Error::UnmappedClass(p.class_id.clone()))?;
                    Ok(Problem {
                        class_id: g.to_string(),
                        ..p.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Certificate {
                problems,
                ..cert.clone()
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_certificates: usize,
    pub n_problems: usize,
    pub mean_problems: f64,
    pub distinct_labels: usize,
    pub label_histogram: BTreeMap<String, usize>,
}

pub fn corpus_stats(corpus: &[Certificate]) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    let mut hist = BTreeMap::new();
    let mut n_problems = 0;
    for cert in corpus {
        n_problems += cert.problems.len();
        for p in &cert.problems {
            *hist.entry(p.class_id.clone()).or_insert(0) += 1;
        }
    }
    Ok(CorpusStats {
        n_certificates: corpus.len(),
        n_problems,
        mean_problems: n_problems as f64 / corpus.len() as f64,
        distinct_labels: hist.len(),
        label_histogram: hist,
    })
}

/// Certificates whose ids are in `ids`, in the order of `ids`.
pub fn select<'a>(corpus: &'a [Certificate], ids: &[String]) -> Result<Vec<&'a Certificate>> {
    let by_id: BTreeMap<&str, &Certificate> = corpus.iter().map(|c| (c.id.as_str(), c)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Format(format!("split references unknown certificate {id:?}")))
        })
        .collect()
}
