//! Completion backends: live HTTP, replay from disk, a rule-based mock and a
//! scripted table for authoring fixtures.

#[cfg(feature = "http")]
pub mod http;
pub mod mock;
pub mod scripted;
pub mod store;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use mock::{mock_respond, MockBackend};
pub use scripted::ScriptedBackend;
pub use store::{ReplayBackend, ReplayStore, StoreEntry};

use crate::prompt::PromptText;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no recorded completions for query {0}")]
    ReplayMiss(String),
    #[error("replay store error: {0}")]
    Store(String),
    #[error("at least one completion must be requested")]
    ZeroCompletions,
}

/// One query as seen by a backend.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub prompt: &'a PromptText,
    pub n: usize,
    /// Store key: hash of the backend salt, `n` and the prompt.
    pub key: &'a str,
}

pub trait Backend {
    fn tag(&self) -> &'static str;

    /// Up to `q.n` completions for the prompt.
    fn complete(&mut self, q: Query<'_>) -> Result<Vec<String>, GatewayError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletionSet {
    pub completions: Vec<String>,
    pub n_requested: usize,
    pub backend: String,
    pub key: String,
}

/// Store key of a query. `salt` carries the backend configuration that
/// affects answers (model name, temperature).
pub fn query_key(salt: &str, n: usize, prompt: &PromptText) -> String {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update([0]);
    h.update(n.to_string().as_bytes());
    h.update([0]);
    h.update(prompt.rendered.as_bytes());
    hex::encode(h.finalize())
}

/// Salt for a model name and an optional sampling temperature.
pub fn salt_for(model: &str, temperature: Option<f64>) -> String {
    match temperature {
        Some(t) => format!("model={model};temperature={t}"),
        None => format!("model={model};temperature=default"),
    }
}

/// A backend plus optional recording of every answer.
pub struct Gateway {
    backend: Box<dyn Backend>,
    salt: String,
    recorder: Option<ReplayStore>,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, salt: impl Into<String>) -> Self {
        Gateway {
            backend,
            salt: salt.into(),
            recorder: None,
        }
    }

    /// Appends every fresh answer to `store`.
    pub fn recording(mut self, store: ReplayStore) -> Self {
        self.recorder = Some(store);
        self
    }

    pub fn backend_tag(&self) -> &'static str {
        self.backend.tag()
    }

    pub fn key(&self, prompt: &PromptText, n: usize) -> String {
        query_key(&self.salt, n, prompt)
    }

    pub fn complete_n(
        &mut self,
        prompt: &PromptText,
        n: usize,
    ) -> Result<CompletionSet, GatewayError> {
        if n == 0 {
            return Err(GatewayError::ZeroCompletions);
        }
        let key = self.key(prompt, n);
        let mut completions = self.backend.complete(Query {
            prompt,
            n,
            key: &key,
        })?;
        completions.truncate(n);
        if completions.is_empty() {
            return Err(GatewayError::BackendUnavailable(
                "backend returned no completions".into(),
            ));
        }
        if let Some(store) = &self.recorder {
            store.append(&key, &prompt.rendered, &completions)?;
        }
        Ok(CompletionSet {
            completions,
            n_requested: n,
            backend: self.backend.tag().to_string(),
            key,
        })
    }
}
