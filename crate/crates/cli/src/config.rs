//! Plain-text `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};
use crate::files;

/// Every key a pipeline config may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "table",
    "c00",
    "K",
    "sigma",
    "T",
    "y_start",
    "y_end",
    "mode",
    "K_max",
    "eps_tail",
    "dt",
    "t_end",
    "precision_digits",
    "N",
    "sim_dt",
    "compare_T",
    "digits",
];

/// Keys without a default.
pub const REQUIRED_KEYS: &[&str] = &["table", "K", "sigma", "T", "y_start", "y_end", "mode"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::validation(format!(
                    "config line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            if cfg.values.contains_key(key) {
                return Err(CliError::validation(format!(
                    "config line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        Self::parse(&files::read(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::validation(format!(
                "unknown config key `{key}` (known: {})",
                KNOWN_KEYS.join(", ")
            )));
        }
        if value.is_empty() {
            return Err(CliError::validation(format!("empty value for `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::validation(format!("`{key} = {v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::validation(format!("missing config key `{key}`")))
    }

    pub fn missing_keys(&self) -> Vec<&'static str> {
        let mut missing: Vec<&'static str> = REQUIRED_KEYS
            .iter()
            .copied()
            .filter(|k| !self.values.contains_key(*k))
            .collect();
        if self.raw("table") == Some("flat") && !self.values.contains_key("c00") {
            missing.push("c00");
        }
        missing
    }

    /// Fails listing every missing key at once.
    pub fn check_complete(&self) -> CliResult<()> {
        let missing = self.missing_keys();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::validation(format!(
                "config is missing keys: {}",
                missing.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_spacing() {
        let cfg = RunConfig::parse("# header\n\ntable = bending  # trailing\nK=8\n  sigma =1.1\n")
            .unwrap();
        assert_eq!(cfg.raw("table"), Some("bending"));
        assert_eq!(cfg.get::<usize>("K").unwrap(), Some(8));
        assert_eq!(cfg.get::<f64>("sigma").unwrap(), Some(1.1));
        assert_eq!(cfg.get::<f64>("T").unwrap(), None);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RunConfig::parse("table bending").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("K = 1\nK = 2").is_err());
        assert!(RunConfig::parse("K =").is_err());
        let cfg = RunConfig::parse("K = eight").unwrap();
        assert!(cfg.get::<usize>("K").is_err());
    }

    #[test]
    fn missing_keys_are_listed() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.missing_keys(), REQUIRED_KEYS.to_vec());
        let flat = RunConfig::parse("table = flat").unwrap();
        assert!(flat.missing_keys().contains(&"c00"));
        assert!(!flat.missing_keys().contains(&"table"));
    }

    #[test]
    fn overrides_replace_values() {
        let mut cfg = RunConfig::parse("T = 5").unwrap();
        cfg.set_pair("T=10").unwrap();
        assert_eq!(cfg.get::<f64>("T").unwrap(), Some(10.0));
        assert!(cfg.set_pair("T").is_err());
    }
}
