use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Backend, GatewayError, Query};

/// One recorded query: `{fingerprint, prompt, responses}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub fingerprint: String,
    pub prompt: String,
    pub responses: Vec<String>,
}

/// Directory of recorded completions, one JSON file per query key.
/// Existing entries are never rewritten.
#[derive(Debug, Clone)]
pub struct ReplayStore {
    dir: PathBuf,
}

impl ReplayStore {
    /// Opens (and creates if needed) a store directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)
            .map_err(|e| GatewayError::Store(format!("{}: {e}", dir.display())))?;
        Ok(ReplayStore { dir })
    }

    /// A store that may not exist; lookups in a missing directory miss.
    pub fn at(dir: impl Into<PathBuf>) -> Self {
        ReplayStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<StoreEntry>, GatewayError> {
        let path = self.path_of(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Store(format!("{}: {e}", path.display()))),
        };
        let entry: StoreEntry = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Store(format!("{}: {e}", path.display())))?;
        Ok((entry.fingerprint == key).then_some(entry))
    }

    /// Records an entry unless one exists for `key` already.
    pub fn append(
        &self,
        key: &str,
        prompt: &str,
        responses: &[String],
    ) -> Result<(), GatewayError> {
        let path = self.path_of(key);
        if path.exists() {
            return Ok(());
        }
        fs::create_dir_all(&self.dir)
            .map_err(|e| GatewayError::Store(format!("{}: {e}", self.dir.display())))?;
        let entry = StoreEntry {
            fingerprint: key.to_string(),
            prompt: prompt.to_string(),
            responses: responses.to_vec(),
        };
        let mut text = serde_json::to_string_pretty(&entry).expect("entry serializes");
        text.push('\n');
        let tmp = self.dir.join(format!("{key}.json.tmp"));
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| GatewayError::Store(format!("{}: {e}", path.display())))
    }

    /// All entries, ordered by key.
    pub fn entries(&self) -> Result<Vec<StoreEntry>, GatewayError> {
        let rd = match fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(GatewayError::Store(format!("{}: {e}", self.dir.display()))),
        };
        let mut keys: Vec<String> = rd
            .filter_map(Result::ok)
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|n| n.strip_suffix(".json"))
                    .map(str::to_string)
            })
            .collect();
        keys.sort();
        let mut out = Vec::new();
        for k in keys {
            if let Some(e) = self.get(&k)? {
                out.push(e);
            }
        }
        Ok(out)
    }
}

/// Answers only from recorded entries.
pub struct ReplayBackend {
    store: ReplayStore,
}

impl ReplayBackend {
    pub fn new(store: ReplayStore) -> Self {
        ReplayBackend { store }
    }
}

impl Backend for ReplayBackend {
    fn tag(&self) -> &'static str {
        "replay"
    }

    fn complete(&mut self, q: Query<'_>) -> Result<Vec<String>, GatewayError> {
        match self.store.get(q.key)? {
            Some(e) if !e.responses.is_empty() => Ok(e.responses),
            _ => Err(GatewayError::ReplayMiss(q.key.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_only_and_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let s = ReplayStore::open(dir.path()).unwrap();
        s.append("k1", "p", &["a".into()]).unwrap();
        s.append("k1", "p", &["b".into()]).unwrap();
        s.append("k0", "q", &["c".into()]).unwrap();
        let reopened = ReplayStore::open(dir.path()).unwrap();
        assert_eq!(reopened.get("k1").unwrap().unwrap().responses, vec!["a"]);
        let keys: Vec<String> = reopened
            .entries()
            .unwrap()
            .into_iter()
            .map(|e| e.fingerprint)
            .collect();
        assert_eq!(keys, vec!["k0", "k1"]);
    }

    #[test]
    fn missing_directory_misses() {
        let s = ReplayStore::at("/nonexistent/ccport-store");
        assert!(s.get("k").unwrap().is_none());
        assert!(s.entries().unwrap().is_empty());
    }
}
