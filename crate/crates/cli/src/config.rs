//! Flat `key = value` configs with optional `[experiment]` sections.
//!
//! Keys before the first section header are shared by every section.
//! `#` and `;` start comments. Lists are comma-separated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl From<sivlab::Error> for ConfigError {
    fn from(e: sivlab::Error) -> Self {
        match &e {
            sivlab::Error::InvalidParameter { name, .. } => Self::new(*name, e.to_string()),
            _ => Self::new("config", e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed file: shared keys plus named sections in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    shared: BTreeMap<String, Entry>,
    sections: Vec<(String, BTreeMap<String, Entry>)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut file = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::new("section", format!("unterminated header on line {line_no}")))?
                    .trim();
                if file.sections.iter().any(|(n, _)| n == name) {
                    return Err(ConfigError::new(name, format!("duplicate section on line {line_no}")));
                }
                file.sections.push((name.to_string(), BTreeMap::new()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(line, format!("expected key = value on line {line_no}")))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::new("", format!("empty key on line {line_no}")));
            }
            let target = match file.sections.last_mut() {
                Some((_, map)) => map,
                None => &mut file.shared,
            };
            let entry = Entry {
                value: value.trim().to_string(),
                line: line_no,
            };
            if let Some(prev) = target.insert(key.clone(), entry) {
                return Err(ConfigError::new(key, format!("duplicate key (lines {} and {line_no})", prev.line)));
            }
        }
        Ok(file)
    }

    pub fn section_names(&self) -> Vec<&str> {
        self.sections.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn shared_value(&self, key: &str) -> Option<&str> {
        self.shared.get(key).map(|e| e.value.as_str())
    }

    /// Shared keys overlaid with the keys of section `name` (if present).
    pub fn section(&self, name: &str) -> Section {
        let mut values: BTreeMap<String, String> =
            self.shared.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect();
        if let Some((_, map)) = self.sections.iter().find(|(n, _)| n == name) {
            values.extend(map.iter().map(|(k, e)| (k.clone(), e.value.clone())));
        }
        Section::new(values)
    }
}

/// Typed reader over one experiment's keys.
///
/// Every read records the resolved value (defaults included), which feeds
/// the config hash; keys never read are reported by [`Section::finish`].
#[derive(Debug, Clone, Default)]
pub struct Section {
    values: BTreeMap<String, String>,
    overrides: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Section {
    pub fn new(values: BTreeMap<String, String>) -> Self {
        Self {
            values,
            ..Self::default()
        }
    }

    /// Value supplied on the command line; wins over the file and is never
    /// reported as unknown.
    pub fn set_override(&mut self, key: &str, value: impl ToString) {
        self.overrides.insert(key.to_string(), value.to_string());
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.overrides.get(key).or_else(|| self.values.get(key)).cloned()
    }

    fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, ConfigError> {
        raw.parse()
            .map_err(|_| ConfigError::new(key, format!("cannot parse `{raw}`")))
    }

    pub fn opt<T: FromStr + ToString>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(raw) => {
                let v: T = Self::parse_value(key, &raw)?;
                self.resolved.insert(key.to_string(), v.to_string());
                Ok(Some(v))
            }
        }
    }

    pub fn get<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        let v = self.opt(key)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Finite float, optionally constrained.
    pub fn f64(&mut self, key: &str, default: f64, check: Check) -> Result<f64, ConfigError> {
        let v = self.get(key, default)?;
        check.apply(key, v)?;
        Ok(v)
    }

    pub fn opt_f64(&mut self, key: &str, check: Check) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.opt(key)?;
        if let Some(v) = v {
            check.apply(key, v)?;
        }
        Ok(v)
    }

    pub fn count(&mut self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        let v = self.get(key, default)?;
        if v < min {
            return Err(ConfigError::new(key, format!("must be ≥ {min}, got {v}")));
        }
        Ok(v)
    }

    pub fn flag(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        self.get(key, default)
    }

    pub fn list(&mut self, key: &str, default: &[f64], check: Check) -> Result<Vec<f64>, ConfigError> {
        let raw = self.raw(key);
        let values = match raw {
            None => default.to_vec(),
            Some(raw) => raw
                .split(',')
                .map(|s| Self::parse_value::<f64>(key, s.trim()))
                .collect::<Result<Vec<_>, _>>()?,
        };
        if values.is_empty() {
            return Err(ConfigError::new(key, "list is empty"));
        }
        for &v in &values {
            check.apply(key, v)?;
        }
        let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.resolved.insert(key.to_string(), joined.join(","));
        Ok(values)
    }

    /// Raw value of an I/O key; accepted but kept out of the hash.
    pub fn untracked(&mut self, key: &str) -> Option<String> {
        self.raw(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.overrides.contains_key(key) || self.values.contains_key(key)
    }

    /// Rejects keys that were present but never read.
    pub fn finish(&self) -> Result<(), ConfigError> {
        match self.values.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(ConfigError::new(k.clone(), "unknown key")),
            None => Ok(()),
        }
    }

    /// SHA-256 of the sorted resolved `key=value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.resolved {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Range constraint applied to a numeric key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    Any,
    Positive,
    NonNegative,
}

impl Check {
    fn apply(self, key: &str, v: f64) -> Result<(), ConfigError> {
        if !v.is_finite() {
            return Err(ConfigError::new(key, format!("must be finite, got {v}")));
        }
        let ok = match self {
            Self::Any => true,
            Self::Positive => v > 0.0,
            Self::NonNegative => v >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            let what = if self == Self::Positive { "> 0" } else { "≥ 0" };
            Err(ConfigError::new(key, format!("must be {what}, got {v}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "
# shared
t1_ns = 1.85
[rabi_analytic]
rabi_ghz = 0.906   ; inline comment
[g2]
rabi_ghz = 1.304
t3_ns = 4
";

    #[test]
    fn sections_overlay_shared_keys() {
        let f = ConfigFile::parse(TEXT).unwrap();
        assert_eq!(f.section_names(), ["rabi_analytic", "g2"]);
        let mut s = f.section("rabi_analytic");
        assert_eq!(s.f64("rabi_ghz", 0.0, Check::Positive).unwrap(), 0.906);
        assert_eq!(s.f64("t1_ns", 0.0, Check::Positive).unwrap(), 1.85);
        assert!(s.finish().is_ok());
    }

    #[test]
    fn unread_key_is_unknown() {
        let mut s = ConfigFile::parse(TEXT).unwrap().section("g2");
        s.f64("rabi_ghz", 0.0, Check::Positive).unwrap();
        s.f64("t1_ns", 0.0, Check::Positive).unwrap();
        assert_eq!(s.finish().unwrap_err().key, "t3_ns");
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(ConfigFile::parse("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn hash_tracks_values_and_defaults() {
        let hash = |text: &str| {
            let mut s = ConfigFile::parse(text).unwrap().section("x");
            s.f64("t1_ns", 1.85, Check::Positive).unwrap();
            s.hash()
        };
        assert_eq!(hash(""), hash("t1_ns = 1.85"));
        assert_ne!(hash(""), hash("t1_ns = 1.9"));
    }

    #[test]
    fn checks_reject_bad_values() {
        let mut s = ConfigFile::parse("t1_ns = -1\nn = x\n").unwrap().section("x");
        assert_eq!(s.f64("t1_ns", 1.0, Check::Positive).unwrap_err().key, "t1_ns");
        assert!(s.count("n", 3, 1).is_err());
    }
}
