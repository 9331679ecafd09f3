//! Text and label encodings: binary bag-of-words, one-of-K class vectors and
//! externally supplied dense embeddings.

mod embedding;
mod tokenize;
mod vocab;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embedding::{load_embeddings, lookup_embedding, save_embeddings, EmbeddingTable};
pub use tokenize::{tokenize, TokenizerScheme};
pub use vocab::{build_vocabulary, load_vocabulary, save_vocabulary, Vocabulary};

/// Which encoding produced a model's inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    #[default]
    Bow,
    Ook,
    Embedding,
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bow" => Ok(FeatureKind::Bow),
            "ook" => Ok(FeatureKind::Ook),
            "embedding" => Ok(FeatureKind::Embedding),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature kind {other:?} (expected bow, ook or embedding)"
            ))),
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureKind::Bow => "bow",
            FeatureKind::Ook => "ook",
            FeatureKind::Embedding => "embedding",
        })
    }
}

/// A sparse binary or dense real feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureVector {
    /// Indices of the one-valued dimensions, strictly increasing.
    Binary { dim: usize, indices: Vec<u32> },
    Dense(Vec<f64>),
}

impl FeatureVector {
    /// Binary vector from arbitrary indices; duplicates collapse.
    pub fn binary(dim: usize, mut indices: Vec<u32>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: last as usize + 1,
                });
            }
        }
        Ok(FeatureVector::Binary { dim, indices })
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector::Binary {
            dim,
            indices: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureVector::Binary { dim, .. } => *dim,
            FeatureVector::Dense(v) => v.len(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            FeatureVector::Binary { dim, indices } => {
                let mut v = vec![0.0; *dim];
                for &i in indices {
                    v[i as usize] = 1.0;
                }
                v
            }
            FeatureVector::Dense(v) => v.clone(),
        }
    }

    /// Inner product with a dense weight slice of the same length.
    pub fn dot(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(self.dim(), w.len());
        match self {
            FeatureVector::Binary { indices, .. } => {
                indices.iter().map(|&i| w[i as usize]).sum()
            }
            FeatureVector::Dense(v) => v.iter().zip(w).map(|(a, b)| a * b).sum(),
        }
    }

    /// `w += alpha * self`.
    pub fn add_scaled_to(&self, alpha: f64, w: &mut [f64]) {
        debug_assert_eq!(self.dim(), w.len());
        match self {
            FeatureVector::Binary { indices, .. } => {
                for &i in indices {
                    w[i as usize] += alpha;
                }
            }
            FeatureVector::Dense(v) => {
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi += alpha * vi;
                }
            }
        }
    }

    pub fn l1_norm(&self) -> f64 {
        match self {
            FeatureVector::Binary { indices, .. } => indices.len() as f64,
            FeatureVector::Dense(v) => v.iter().map(|x| x.abs()).sum(),
        }
    }

    /// `lambda * self` as a dense vector.
    pub fn scaled(&self, lambda: f64) -> FeatureVector {
        FeatureVector::Dense(self.to_dense().into_iter().map(|x| x * lambda).collect())
    }

    pub fn is_finite(&self) -> bool {
        match self {
            FeatureVector::Binary { .. } => true,
            FeatureVector::Dense(v) => v.iter().all(|x| x.is_finite()),
        }
    }
}

impl AsRef<FeatureVector> for FeatureVector {
    fn as_ref(&self) -> &FeatureVector {
        self
    }
}

/// Bijection from class ids onto `0..K`, ordered by class id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassIndex(BTreeMap<String, usize>);

impl ClassIndex {
    pub fn from_classes<I, S>(classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids: Vec<String> = classes.into_iter().map(Into::into).collect();
        ids.sort();
        ids.dedup();
        ClassIndex(ids.into_iter().enumerate().map(|(i, c)| (c, i)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, class_id: &str) -> Option<usize> {
        self.0.get(class_id).copied()
    }

    /// Class ids in index order.
    pub fn classes(&self) -> Vec<&str> {
        let mut v: Vec<(&str, usize)> = self.0.iter().map(|(k, &i)| (k.as_str(), i)).collect();
        v.sort_by_key(|&(_, i)| i);
        v.into_iter().map(|(k, _)| k).collect()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        for &i in self.0.values() {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return false;
            }
        }
        true
    }
}

/// Binary bag-of-words over `vocab`. Out-of-vocabulary tokens are ignored.
pub fn bow_vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Result<FeatureVector> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let indices = tokens
        .iter()
        .filter_map(|t| vocab.index_of(t.as_ref()))
        .map(|i| i as u32)
        .collect();
    FeatureVector::binary(vocab.len(), indices)
}

/// One-hot vector for `class_id`; the all-zero vector for classes not in `index`.
pub fn ook_vectorize(class_id: &str, index: &ClassIndex) -> FeatureVector {
    let indices = index.get(class_id).map(|i| vec![i as u32]).unwrap_or_default();
    FeatureVector::Binary {
        dim: index.len(),
        indices,
    }
}
