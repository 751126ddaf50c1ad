//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. A key may repeat to
//! build a list, and a value may itself be a comma-separated list. Keys are
//! matched with `_` and `-` treated alike.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Vec<String>>,
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('_', "-")
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", lineno + 1)))?;
            let key = normalize_key(k);
            if key.is_empty() {
                return Err(Error::Config(format!("config line {}: empty key", lineno + 1)));
            }
            entries.entry(key).or_default().push(v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Last value given for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .get(&normalize_key(key))
            .and_then(|v| v.last())
            .map(String::as_str)
    }

    /// Every value for `key`, with comma lists flattened.
    pub fn get_list(&self, key: &str) -> Option<Vec<String>> {
        self.entries.get(&normalize_key(key)).map(|vals| {
            vals.iter()
                .flat_map(|v| v.split(','))
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }
}
