//! Key=value config files and flag resolution.
//!
//! Precedence: command-line flag, then config-file entry, then built-in
//! default. Every resolved value is echoed into the artifact metadata so
//! outputs are self-describing.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use budgetalloc::{Error, Result};

/// Parsed `key=value` file. Blank lines and `#` comments are skipped.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "config line {} is not key=value: '{line}'",
                    idx + 1
                )));
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }
}

/// Tracks resolved values for the reproducibility header.
#[derive(Debug)]
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    pub echo: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Self {
            file,
            echo: BTreeMap::new(),
        }
    }

    /// Flag over config over default.
    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
    {
        let resolved = match flag {
            Some(v) => v,
            None => match self.file.raw(key) {
                Some(raw) => raw.parse().map_err(|_| {
                    Error::Config(format!("config key '{key}': cannot parse '{raw}'"))
                })?,
                None => default,
            },
        };
        self.echo.insert(key.to_string(), resolved.to_string());
        Ok(resolved)
    }

    /// Flag over config; None when neither is present.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
    {
        let resolved = match flag {
            Some(v) => Some(v),
            None => match self.file.raw(key) {
                Some(raw) => Some(raw.parse().map_err(|_| {
                    Error::Config(format!("config key '{key}': cannot parse '{raw}'"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &resolved {
            self.echo.insert(key.to_string(), v.to_string());
        }
        Ok(resolved)
    }

    /// Required: flag or config entry must supply it.
    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| Error::Config(format!("missing required parameter '{key}'")))
    }

    pub fn note(&mut self, key: &str, value: impl Display) {
        self.echo.insert(key.to_string(), value.to_string());
    }
}

pub fn parse_list<T: FromStr>(spec: &str, what: &str) -> Result<Vec<T>> {
    spec.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("bad {what} entry '{s}'")))
        })
        .collect()
}
