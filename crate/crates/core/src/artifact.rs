//! Versioned artifact files.
//!
//! Every file this crate writes for later consumption (vocabularies, models,
//! reports, splits) starts with a single header line
//! `orthoplan-<kind> v<version>` followed by the payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub fn header(kind: &str) -> String {
    format!("orthoplan-{kind} v{FORMAT_VERSION}")
}

/// Splits `text` into its header line and payload, checking the kind and version.
pub fn strip_header<'a>(text: &'a str, kind: &str) -> Result<&'a str> {
    let (first, rest) = match text.split_once('\n') {
        Some((first, rest)) => (first, rest),
        None => (text, ""),
    };
    let first = first.trim_end_matches('\r');
    let expected_prefix = format!("orthoplan-{kind} v");
    let version = first.strip_prefix(&expected_prefix).ok_or_else(|| {
        Error::Format(format!(
            "bad header {first:?}: expected {:?}",
            header(kind)
        ))
    })?;
    let version: u32 = version
        .parse()
        .map_err(|_| Error::Format(format!("bad format version in header {first:?}")))?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported {kind} format version {version} (this build reads v{FORMAT_VERSION})"
        )));
    }
    Ok(rest)
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("cannot serialize {kind}: {e}")))?;
    let text = format!("{}\n{}\n", header(kind), body);
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let body = strip_header(&text, kind)?;
    serde_json::from_str(body)
        .map_err(|e| Error::Format(format!("{}: malformed {kind} body: {e}", path.display())))
}
