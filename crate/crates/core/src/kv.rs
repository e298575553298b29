//! `key=value` text blocks used in file headers and reports.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvText {
    entries: Vec<(String, String)>,
}

impl KvText {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    /// Floats are written in shortest round-trip form so parsing them back
    /// reproduces the same bits.
    pub fn push_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.push(key, format!("{value:?}"))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, what: &str, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::parse(what, format!("missing key {key:?}")))
    }

    pub fn parse_value<T: FromStr>(&self, what: &str, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.require(what, key)?;
        raw.parse::<T>()
            .map_err(|e| Error::parse(what, format!("bad value {raw:?} for {key:?}: {e}")))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    /// Keys present in the block that are not in `known`.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.keys()
            .filter(|k| !known.contains(k))
            .map(str::to_string)
            .collect()
    }

    pub fn parse(what: &str, text: &str) -> Result<Self> {
        let mut out = KvText::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(what, format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            out.entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }
}
