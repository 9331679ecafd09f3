//! Precomputed sentence embeddings.
//!
//! File format (UTF-8):
//!
//! ```text
//! #dim=512
//! <key><TAB><v1> <v2> ... <v512>
//! ```
//!
//! Keys are certificate ids or problem surface texts. Inside a key, `\\`,
//! `\t`, `\n` and `\r` are written as backslash escapes so any text fits on
//! one line.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if self.entries.contains_key(&key) {
            return Err(Error::Format(format!("duplicate embedding key {key:?}")));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Exact-match lookup; a missing key is an error, never a zero vector.
pub fn lookup_embedding(key: &str, table: &EmbeddingTable) -> Result<FeatureVector> {
    table
        .get(key)
        .map(|v| FeatureVector::Dense(v.to_vec()))
        .ok_or_else(|| Error::EmbeddingNotFound(key.to_string()))
}

fn escape_key(key: &str) -> String {
    let mut s = String::with_capacity(key.len());
    for c in key.chars() {
        match c {
            '\\' => s.push_str("\\\\"),
            '\t' => s.push_str("\\t"),
            '\n' => s.push_str("\\n"),
            '\r' => s.push_str("\\r"),
            c => s.push(c),
        }
    }
    s
}

fn unescape_key(raw: &str, line: usize) -> Result<String> {
    let mut s = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            s.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => s.push('\\'),
            Some('t') => s.push('\t'),
            Some('n') => s.push('\n'),
            Some('r') => s.push('\r'),
            other => {
                return Err(Error::parse(line, format!("bad escape \\{}", other.unwrap_or(' '))))
            }
        }
    }
    Ok(s)
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty embedding file".into()))?;
    let dim: usize = header
        .trim()
        .strip_prefix("#dim=")
        .and_then(|d| d.parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::parse(1, "expected header #dim=<positive integer>"))?;
    let mut table = EmbeddingTable::new(dim);
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        if line.is_empty() {
            continue;
        }
        let (key, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(n, "expected key<TAB>values"))?;
        let vector = values
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(n, format!("bad value {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vector.len() != dim {
            return Err(Error::parse(
                n,
                format!("expected {dim} values, found {}", vector.len()),
            ));
        }
        table
            .insert(unescape_key(key, n)?, vector)
            .map_err(|e| Error::parse(n, e))?;
    }
    Ok(table)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text)
}

/// Writes the table with keys in sorted order.
pub fn save_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let mut keys: Vec<&String> = table.entries.keys().collect();
    keys.sort();
    let mut s = format!("#dim={}\n", table.dim);
    for k in keys {
        let vals: Vec<String> = table.entries[k].iter().map(|x| x.to_string()).collect();
        s.push_str(&escape_key(k));
        s.push('\t');
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_present_and_missing() {
        let mut t = EmbeddingTable::new(3);
        t.insert("a", vec![0.5, -1.0, 2.0]).unwrap();
        assert_eq!(
            lookup_embedding("a", &t).unwrap(),
            FeatureVector::Dense(vec![0.5, -1.0, 2.0])
        );
        assert!(matches!(
            lookup_embedding("b", &t),
            Err(Error::EmbeddingNotFound(_))
        ));
    }

    #[test]
    fn orthogonal_vectors_have_zero_cosine() {
        let mut t = EmbeddingTable::new(4);
        t.insert("x", vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        t.insert("y", vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let x = lookup_embedding("x", &t).unwrap().to_dense();
        let y = lookup_embedding("y", &t).unwrap().to_dense();
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert_eq!(dot / (nx * ny), 0.0);
    }

    #[test]
    fn file_round_trip_with_awkward_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.tsv");
        let mut t = EmbeddingTable::new(2);
        t.insert("line one\nline\ttwo \\ end", vec![0.1, 1e-300]).unwrap();
        t.insert("plain", vec![-3.25, 7.0]).unwrap();
        save_embeddings(&path, &t).unwrap();
        assert_eq!(load_embeddings(&path).unwrap(), t);
    }

    #[test]
    fn rejects_inconsistent_dim() {
        assert!(parse_embeddings("#dim=2\na\t1 2 3\n").is_err());
        assert!(parse_embeddings("#dim=2\na\t1 2\na\t3 4\n").is_err());
        assert!(parse_embeddings("dim 2\n").is_err());
        assert!(parse_embeddings("#dim=2\na\t1 nan\n").is_err());
    }
}
