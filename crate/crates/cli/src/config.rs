//! Optional `key = value` configuration files. Keys are the long flag names
//! (`completions`, `log-dir`, ...); flags given on the command line win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("{path}: unknown key `{key}`")]
    UnknownKey { path: PathBuf, key: String },
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
}

pub const KEYS: &[&str] = &[
    "input",
    "manifest",
    "out",
    "backend",
    "completions",
    "passes",
    "cache",
    "budget",
    "spelling",
    "log-dir",
    "script",
    "record",
    "model",
    "temperature",
    "endpoint",
    "seed-label",
    "gt",
    "original",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    base: PathBuf,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
            })?;
            let k = k.trim().to_string();
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey {
                    path: path.to_path_buf(),
                    key: k,
                });
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(ConfigFile {
            base: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            values,
        })
    }

    /// The flag value if given, else the parsed file value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    /// Like [`pick`](Self::pick) for paths; file paths are relative to the
    /// config file.
    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.values.get(key).map(|v| self.base.join(v)))
    }

    /// Comma-separated path list.
    pub fn paths(&self, flag: Vec<PathBuf>, key: &str) -> Vec<PathBuf> {
        if !flag.is_empty() {
            return flag;
        }
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| self.base.join(s))
                    .collect()
            })
            .unwrap_or_default()
    }
}
