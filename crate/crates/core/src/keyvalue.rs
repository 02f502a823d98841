//! Flat `key = value` text files with `#` comments.
//!
//! Keys are dotted paths (`transducer.3.x_m`). Readers take the keys they
//! understand; [`KeyValueFile::finish`] rejects whatever is left so typos
//! do not pass silently.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KeyValueFile {
    source: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValueFile {
    /// Parses `text`; `source` names the file in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: source.into(),
                    line: line_no,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse { path: source.into(), line: line_no, message: format!("bad key '{key}'") });
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (line_no, value.to_string())) {
                return Err(Error::Parse {
                    path: source.into(),
                    line: line_no,
                    message: format!("duplicate key '{key}' (first on line {first})"),
                });
            }
        }
        Ok(Self { source: source.into(), entries })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Removes `key` and parses its value.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|e| Error::Parse {
                path: self.source.clone(),
                line,
                message: format!("{key}: cannot parse '{value}': {e}"),
            }),
        }
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)?.ok_or_else(|| Error::Validation { field: key.into(), message: "missing".into() })
    }

    /// Removes and returns all keys starting with `prefix`, in key order.
    pub fn take_prefixed(&mut self, prefix: &str) -> Vec<(String, usize, String)> {
        let keys: Vec<String> = self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        keys.into_iter()
            .map(|k| {
                let (line, v) = self.entries.remove(&k).expect("key listed above");
                (k, line, v)
            })
            .collect()
    }

    /// Errors on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => {
                Err(Error::Parse { path: self.source, line, message: format!("unknown key '{key}'") })
            }
        }
    }
}
