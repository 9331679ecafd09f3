use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokenizer schemes. Both lowercase their input.
///
/// * `whitespace` splits on Unicode whitespace.
/// * `unicode-words` also splits on any character that is neither
///   alphanumeric nor `_`, dropping punctuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerScheme {
    #[default]
    Whitespace,
    UnicodeWords,
}

impl TokenizerScheme {
    pub fn name(self) -> &'static str {
        match self {
            TokenizerScheme::Whitespace => "whitespace",
            TokenizerScheme::UnicodeWords => "unicode-words",
        }
    }

    pub fn tokenize(self, text: &str) -> Vec<String> {
        let lower = text.to_lowercase();
        match self {
            TokenizerScheme::Whitespace => lower.split_whitespace().map(String::from).collect(),
            TokenizerScheme::UnicodeWords => lower
                .split(|c: char| !(c.is_alphanumeric() || c == '_'))
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect(),
        }
    }
}

impl FromStr for TokenizerScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(TokenizerScheme::Whitespace),
            "unicode-words" => Ok(TokenizerScheme::UnicodeWords),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

impl fmt::Display for TokenizerScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tokenizes `text` with the scheme named `scheme`.
pub fn tokenize(text: &str, scheme: &str) -> Result<Vec<String>> {
    Ok(scheme.parse::<TokenizerScheme>()?.tokenize(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_split() {
        assert_eq!(
            tokenize("Overjet +6mm noted", "whitespace").unwrap(),
            vec!["overjet", "+6mm", "noted"]
        );
        assert_eq!(
            tokenize("a\tb\n- c\u{3000}d", "whitespace").unwrap(),
            vec!["a", "b", "-", "c", "d"]
        );
    }

    #[test]
    fn unicode_words_strips_punctuation() {
        assert_eq!(
            tokenize("Overjet +6mm, noted. kw_g3_0", "unicode-words").unwrap(),
            vec!["overjet", "6mm", "noted", "kw_g3_0"]
        );
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("", "whitespace").unwrap().is_empty());
        assert!(tokenize("  \n ", "unicode-words").unwrap().is_empty());
    }

    #[test]
    fn unknown_scheme() {
        assert!(matches!(tokenize("x", "mecab"), Err(Error::UnknownScheme(_))));
    }

    #[test]
    fn generator_text_contains_keyword() {
        let spec = crate::corpus::SynthSpec {
            n_certificates: 40,
            n_labels: 6,
            problems_per_cert_mean: 3.0,
            ..Default::default()
        };
        let (corpus, _) = crate::corpus::generate_synthetic(&spec).unwrap();
        let cert = corpus
            .iter()
            .find(|c| c.problems.iter().any(|p| p.class_id == "g3"))
            .expect("some certificate carries g3");
        let tokens = tokenize(&cert.findings_text, "whitespace").unwrap();
        assert!(tokens.iter().any(|t| t == "kw_g3_0"));
    }
}
