// SPDX-License-Identifier: Apache-2.0

//! Flat `key = value` parameter sets.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{HarnessError, Result};

/// String-valued parameters with typed accessors.
///
/// Keys are kept sorted so reports and sweep rows list them in a fixed order.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; a later duplicate replaces an earlier one.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut out = Self::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Parse {
                    path: origin.to_path_buf(),
                    line: k + 1,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(HarnessError::Parse {
                    path: origin.to_path_buf(),
                    line: k + 1,
                    msg: "empty key".into(),
                });
            }
            out.set(key, value.trim());
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses a single `key=value` override.
    pub fn parse_assignment(s: &str) -> Result<(String, String)> {
        match s.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => Err(HarnessError::contract(format!("expected key=value, got `{s}`"))),
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.0.insert(key.into(), value.into());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    /// Entries of `other` replace entries here.
    pub fn merge(&mut self, other: &Params) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.str(key)
            .ok_or_else(|| HarnessError::contract(format!("missing parameter `{key}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| HarnessError::contract(format!("parameter `{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| HarnessError::contract(format!("missing parameter `{key}`")))
    }

    /// Booleans accept `true/false`, `1/0` and `yes/no`.
    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") | Some("") => Ok(true),
            Some(v) => Err(HarnessError::contract(format!("parameter `{key}`: not a boolean: `{v}`"))),
        }
    }
}

impl FromIterator<(String, String)> for Params {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_skips_comments() {
        let p = Params::parse("# c\n n = 16 \n\neps=0.1\nn = 32\n", Path::new("x")).unwrap();
        assert_eq!(p.require::<usize>("n").unwrap(), 32);
        assert_eq!(p.require::<f64>("eps").unwrap(), 0.1);
    }

    #[test]
    fn rejects_lines_without_equals() {
        let e = Params::parse("n 16\n", Path::new("cfg")).unwrap_err();
        assert!(matches!(e, HarnessError::Parse { line: 1, .. }));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn merge_overrides() {
        let mut a = Params::parse("n = 1\nm = 2", Path::new("a")).unwrap();
        let b = Params::parse("m = 3", Path::new("b")).unwrap();
        a.merge(&b);
        assert_eq!(a.str("n"), Some("1"));
        assert_eq!(a.str("m"), Some("3"));
    }

    #[test]
    fn typed_errors_are_contract_violations() {
        let p = Params::parse("n = x", Path::new("a")).unwrap();
        assert!(p.get::<u64>("n").is_err());
        assert!(p.require::<u64>("m").is_err());
        assert!(!p.flag("far").unwrap());
    }
}
