//! Shared helpers for the line-oriented text formats (worlds, demos, models).
//!
//! Floats are written with `{:?}`, which prints the shortest string that
//! parses back to the same bits, so save/load round-trips are exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn join_f64(values: &[f64], sep: &str) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        let _ = write!(out, "{v:?}");
    }
    out
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Cursor over non-empty lines with 1-based line numbers for diagnostics.
pub(crate) struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    pub fn new(path: impl Into<PathBuf>, text: &'a str) -> Self {
        Self {
            path: path.into(),
            iter: text.lines().enumerate().peekable(),
            last_line: 0,
        }
    }

    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path.clone(), self.last_line, msg)
    }

    pub fn next_line(&mut self) -> Result<&'a str> {
        self.try_next()
            .ok_or_else(|| Error::parse(self.path.clone(), self.last_line + 1, "unexpected end of file"))
    }

    pub fn try_next(&mut self) -> Option<&'a str> {
        for (i, line) in self.iter.by_ref() {
            self.last_line = i + 1;
            if !line.trim().is_empty() {
                return Some(line);
            }
        }
        None
    }

    /// Next line, which must begin with `keyword`; returns the remaining tokens.
    pub fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some(k) if k == keyword => Ok(toks.collect()),
            other => Err(self.err(format!("expected `{keyword}`, found `{}`", other.unwrap_or("")))),
        }
    }

    /// Next line must be `keyword value`; returns the parsed value.
    pub fn single<T: FromStr>(&mut self, keyword: &str) -> Result<T> {
        let toks = self.expect(keyword)?;
        if toks.len() != 1 {
            return Err(self.err(format!("`{keyword}` takes one value")));
        }
        self.parse(toks[0], keyword)
    }

    pub fn parse<T: FromStr>(&self, tok: &str, what: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("invalid {what} `{tok}`")))
    }

    pub fn parse_all<T: FromStr>(&self, toks: &[&str], what: &str) -> Result<Vec<T>> {
        toks.iter().map(|t| self.parse(t, what)).collect()
    }

    /// Value of a `key=value` token.
    pub fn kv<T: FromStr>(&self, tok: &str, key: &str) -> Result<T> {
        let value = tok
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| self.err(format!("expected `{key}=...`, found `{tok}`")))?;
        self.parse(value, key)
    }
}
