//! Shared helpers for the plain-text file formats.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// Round-trippable float text (17 significant digits).
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses `key=value` pairs separated by commas.
pub fn parse_pairs(body: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| format!("'{item}' is not a key=value pair"))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Lines paired with their 1-based line numbers, with I/O errors tagged by path.
pub(crate) fn numbered_lines<'a, R: BufRead + 'a>(
    r: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    r.lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(|e| Error::io(path, e)))
}
