//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, keys are the long flag names
//! with either dashes or underscores. Command-line flags take precedence.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`", idx + 1))?;
            let key = normalize(key);
            if key.is_empty() {
                bail!("config line {}: empty key", idx + 1);
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("config line {}: duplicate key `{key}`", idx + 1);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("config: reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config: {}", path.display()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    /// Parsed value of `key`, if present.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config: bad value for `{key}`: {e}")))
            .transpose()
    }

    /// Keys not in `known`, for rejecting typos.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        let known: Vec<String> = known.iter().map(|k| normalize(k)).collect();
        self.entries
            .keys()
            .filter(|k| !known.contains(k))
            .cloned()
            .collect()
    }

    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        let unknown = self.unknown_keys(known);
        if unknown.is_empty() {
            Ok(())
        } else {
            bail!("config: unknown keys: {}", unknown.join(", "))
        }
    }
}

/// Flag value if given, else the config value, else `None`.
pub fn pick<T>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

/// Renders `key = value` lines in the order given.
pub fn render(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

/// Parses a kebab-case enum value through its serde representation.
pub fn parse_enum<T: serde::de::DeserializeOwned>(value: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.trim().to_string()))
        .map_err(|_| anyhow!("unknown {what} `{value}`"))
}

/// Kebab-case name of an enum value.
pub fn enum_name<T: serde::Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let c = ConfigFile::parse("# run\nmax-iters = 50\nalpha=2.5 # weight\n\n").unwrap();
        assert_eq!(c.get::<usize>("max_iters").unwrap(), Some(50));
        assert_eq!(c.get::<f64>("alpha").unwrap(), Some(2.5));
        assert_eq!(c.get::<f64>("beta").unwrap(), None);
    }

    #[test]
    fn flags_override_file() {
        let c = ConfigFile::parse("k = 3").unwrap();
        assert_eq!(pick(Some(5usize), &c, "k").unwrap(), Some(5));
        assert_eq!(pick(None::<usize>, &c, "k").unwrap(), Some(3));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ConfigFile::parse("alpha 1").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2").is_err());
        let c = ConfigFile::parse("alpah = 1").unwrap();
        assert!(c.reject_unknown(&["alpha"]).is_err());
    }
}
