//! A table of hand-written answers keyed by task and declaration name.
//! Recording its answers produces replay fixtures.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{Backend, GatewayError, Query};
use crate::prompt::PromptSections;
use crate::source::Declaration;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Answers {
    One(String),
    Many(Vec<String>),
}

/// Answers `"<task tag>:<declaration name>"` lookups; unknown queries get
/// empty answers (no change).
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    table: BTreeMap<String, Vec<String>>,
}

impl ScriptedBackend {
    /// Parses a JSON object mapping keys to one answer or a list of answers.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, Answers> = serde_json::from_str(text)?;
        let table = raw
            .into_iter()
            .map(|(k, v)| {
                let list = match v {
                    Answers::One(s) => vec![s],
                    Answers::Many(l) => l,
                };
                (k, list)
            })
            .collect();
        Ok(ScriptedBackend { table })
    }

    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::BackendUnavailable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| GatewayError::BackendUnavailable(format!("{}: {e}", path.display())))
    }

    pub fn insert(&mut self, key: impl Into<String>, answers: Vec<String>) {
        self.table.insert(key.into(), answers);
    }

    /// Lookup key for a rendered prompt.
    pub fn key_of(rendered: &str) -> Option<String> {
        let sec = PromptSections::parse(rendered)?;
        let decl = Declaration::from_code(&sec.code, Path::new("")).ok()?;
        Some(format!("{}:{}", sec.task?.tag(), decl.name))
    }
}

impl Backend for ScriptedBackend {
    fn tag(&self) -> &'static str {
        "scripted"
    }

    fn complete(&mut self, q: Query<'_>) -> Result<Vec<String>, GatewayError> {
        let answers = ScriptedBackend::key_of(&q.prompt.rendered)
            .and_then(|k| self.table.get(&k))
            .filter(|a| !a.is_empty());
        Ok(match answers {
            // Cycle through the listed answers to fill all n slots.
            Some(a) => (0..q.n).map(|i| a[i % a.len()].clone()).collect(),
            None => vec![String::new(); q.n],
        })
    }
}
