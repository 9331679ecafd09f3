use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::TokenizerScheme;
use crate::artifact;
use crate::error::{Error, Result};

/// Token-to-index map built from a training corpus.
///
/// Index order is descending corpus frequency, ties by token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    pub min_count: usize,
    /// Scheme the build documents were tokenized with.
    pub scheme: TokenizerScheme,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, min_count: usize, scheme: TokenizerScheme) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            index,
            min_count,
            scheme,
        }
    }

    /// Vocabulary with a given token order, as stored inside other artifacts.
    pub fn from_ordered(tokens: Vec<String>, scheme: TokenizerScheme) -> Result<Self> {
        let v = Vocabulary::from_tokens(tokens, 1, scheme);
        if v.index.len() != v.tokens.len() {
            return Err(Error::Format("duplicate token in vocabulary".into()));
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Tokens in index order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn with_scheme(mut self, scheme: TokenizerScheme) -> Self {
        self.scheme = scheme;
        self
    }
}

/// Keeps every token whose total count over `docs` is at least `min_count`.
pub fn build_vocabulary<S: AsRef<str>>(docs: &[Vec<S>], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        for t in doc {
            *counts.entry(t.as_ref()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = kept.into_iter().map(|(t, _)| t.to_string()).collect();
    Ok(Vocabulary::from_tokens(tokens, min_count, TokenizerScheme::default()))
}

// File layout after the header:
//   min_count<TAB>N
//   scheme<TAB>NAME
//   token<TAB>index     (one line per token, in index order)

pub fn save_vocabulary(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut s = artifact::header("vocabulary");
    s.push('\n');
    s.push_str(&format!("min_count\t{}\n", vocab.min_count));
    s.push_str(&format!("scheme\t{}\n", vocab.scheme));
    for (i, t) in vocab.tokens.iter().enumerate() {
        s.push_str(&format!("{t}\t{i}\n"));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_vocabulary(&text)
}

fn parse_vocabulary(text: &str) -> Result<Vocabulary> {
    let body = artifact::strip_header(text, "vocabulary")?;
    let mut lines = body.lines().enumerate().map(|(i, l)| (i + 2, l));
    let mut field = |name: &str| -> Result<String> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::Format(format!("vocabulary file lacks {name}")))?;
        match line.split_once('\t') {
            Some((k, v)) if k == name => Ok(v.to_string()),
            _ => Err(Error::parse(n, format!("expected {name} line"))),
        }
    };
    let min_count: usize = field("min_count")?
        .parse()
        .map_err(|_| Error::Format("bad min_count in vocabulary file".into()))?;
    let scheme: TokenizerScheme = field("scheme")?.parse()?;
    let mut tokens = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (tok, idx) = line
            .rsplit_once('\t')
            .ok_or_else(|| Error::parse(n, "expected token<TAB>index"))?;
        let idx: usize = idx.parse().map_err(|_| Error::parse(n, "bad index"))?;
        if idx != tokens.len() {
            return Err(Error::parse(
                n,
                format!("index {idx} out of order (expected {})", tokens.len()),
            ));
        }
        tokens.push(tok.to_string());
    }
    let vocab = Vocabulary::from_tokens(tokens, min_count, scheme);
    if vocab.index.len() != vocab.tokens.len() {
        return Err(Error::Format("vocabulary file repeats a token".into()));
    }
    Ok(vocab)
}
