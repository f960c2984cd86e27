//! Flat `key = value` configuration.
//!
//! Every command has a fixed key table. Values are resolved in order of
//! increasing precedence: built-in defaults, the `--config` file, then
//! command-line flags. The resolved table is what a manifest records and
//! what `replay` feeds back in.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// `(key, default)`; an empty default means the key has no value until
/// one is supplied.
pub type KeyTable = [(&'static str, String)];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resolved {
    values: BTreeMap<String, String>,
}

/// Parses a config file body. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", i + 1))?;
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

impl Resolved {
    /// A config file, when given, must set every key in `mandatory`.
    pub fn build(
        table: &KeyTable,
        file: Option<&Path>,
        mandatory: &[&str],
        flags: &[(&str, Option<String>)],
    ) -> Result<Resolved> {
        let mut values: BTreeMap<String, String> =
            table.iter().map(|(k, v)| ((*k).to_owned(), v.clone())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let entries = parse_config(&text)?;
            for (k, v) in &entries {
                if !values.contains_key(k) {
                    bail!("unknown config key `{k}`");
                }
                values.insert(k.clone(), v.clone());
            }
            if let Some(k) = mandatory.iter().find(|k| !entries.iter().any(|(e, _)| e == *k)) {
                bail!("missing config key `{k}`");
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                debug_assert!(values.contains_key(*k), "flag {k} missing from key table");
                values.insert((*k).to_owned(), v.clone());
            }
        }
        Ok(Resolved { values })
    }

    pub fn from_map(values: BTreeMap<String, String>) -> Resolved {
        Resolved { values }
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| anyhow!("missing config key `{key}`"))
    }

    /// The value of `key`, which must be non-empty.
    pub fn required(&self, key: &str) -> Result<&str> {
        match self.raw(key)? {
            "" => bail!("missing config key `{key}`"),
            v => Ok(v),
        }
    }

    pub fn optional(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.required(key)?;
        raw.parse().map_err(|e| anyhow!("invalid value `{raw}` for config key `{key}`: {e}"))
    }

    /// Comma-separated list; empty entries are rejected.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| anyhow!("invalid entry `{s}` in config key `{key}`: {e}"))
            })
            .collect()
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_owned(), value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Vec<(&'static str, String)> {
        vec![("alpha", "1.0".into()), ("input", String::new()), ("grid", "1,2".into())]
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let f = write("# comment\nalpha = 2\ninput=a.txt\n");
        let r = Resolved::build(&table(), Some(f.path()), &[], &[("alpha", Some("3".into()))]).unwrap();
        assert_eq!(r.get::<f64>("alpha").unwrap(), 3.0);
        assert_eq!(r.required("input").unwrap(), "a.txt");
        assert_eq!(r.list::<u32>("grid").unwrap(), vec![1, 2]);
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let f = write("alpha = 2\nbeta = 1\n");
        let e = Resolved::build(&table(), Some(f.path()), &[], &[]).unwrap_err();
        assert!(e.to_string().contains("`beta`"), "{e}");
        let f = write("alpha = 2\ngrid = 1\n");
        let e = Resolved::build(&table(), Some(f.path()), &["alpha", "input", "grid"], &[]).unwrap_err();
        assert!(e.to_string().contains("missing config key `input`"), "{e}");
        let r = Resolved::build(&table(), None, &[], &[]).unwrap();
        assert!(r.required("input").unwrap_err().to_string().contains("`input`"));
    }

    #[test]
    fn bad_values_name_the_key() {
        let r = Resolved::build(&table(), None, &[], &[("alpha", Some("x".into()))]).unwrap();
        assert!(r.get::<f64>("alpha").unwrap_err().to_string().contains("`alpha`"));
    }
}
