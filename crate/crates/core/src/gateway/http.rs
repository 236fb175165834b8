//! OpenAI-compatible chat-completions backend.

use std::thread::sleep;
use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, GatewayError, Query};

pub const ENV_ENDPOINT: &str = "CCPORT_ENDPOINT";
pub const ENV_API_KEY: &str = "CCPORT_API_KEY";
pub const ENV_MODEL: &str = "CCPORT_MODEL";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: Option<f64>,
    pub attempts: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl HttpConfig {
    /// Defaults overridden by whichever of the endpoint, key and model
    /// variables are set.
    pub fn from_env() -> HttpConfig {
        let mut c = HttpConfig::default();
        if let Ok(e) = std::env::var(ENV_ENDPOINT) {
            c.endpoint = e;
        }
        c.api_key = std::env::var(ENV_API_KEY).ok();
        if let Ok(m) = std::env::var(ENV_MODEL) {
            c.model = m;
        }
        c
    }
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: String::new(),
            api_key: None,
            model: "gpt-4".to_string(),
            temperature: None,
            attempts: 3,
            backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(300),
        }
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        HttpBackend { cfg, agent }
    }

    fn request_body(&self, q: &Query<'_>) -> Value {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": q.prompt.rendered}],
            "n": q.n,
        });
        if let Some(t) = self.cfg.temperature {
            body["temperature"] = json!(t);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<Vec<String>, String> {
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(k) = &self.cfg.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let v: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        parse_choices(&v)
    }
}

/// Extracts `choices[].message.content`.
pub fn parse_choices(v: &Value) -> Result<Vec<String>, String> {
    let choices = v
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| "response has no choices".to_string())?;
    Ok(choices
        .iter()
        .filter_map(|c| c.pointer("/message/content").and_then(Value::as_str))
        .map(str::to_string)
        .collect())
}

impl Backend for HttpBackend {
    fn tag(&self) -> &'static str {
        "http"
    }

    fn complete(&mut self, q: Query<'_>) -> Result<Vec<String>, GatewayError> {
        let body = self.request_body(&q);
        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 0..self.cfg.attempts.max(1) {
            if attempt > 0 {
                log::warn!("retrying completion request in {delay:?}: {last}");
                sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Ok(c) if !c.is_empty() => return Ok(c),
                Ok(_) => last = "response has no completions".into(),
                Err(e) => last = e,
            }
        }
        Err(GatewayError::BackendUnavailable(format!(
            "{} attempts failed, last error: {last}",
            self.cfg.attempts.max(1)
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::PromptText;

    #[test]
    fn choices_are_extracted_in_order() {
        let v = json!({"choices": [
            {"message": {"role": "assistant", "content": "a"}},
            {"message": {"role": "assistant", "content": "b"}}
        ]});
        assert_eq!(parse_choices(&v).unwrap(), vec!["a", "b"]);
        assert!(parse_choices(&json!({"error": "x"})).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_unavailable_after_retries() {
        let mut b = HttpBackend::new(HttpConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            backoff: Duration::from_millis(1),
            timeout: Duration::from_secs(2),
            ..HttpConfig::default()
        });
        let p = PromptText::new("hi".into());
        let r = b.complete(Query {
            prompt: &p,
            n: 1,
            key: "k",
        });
        match r {
            Err(GatewayError::BackendUnavailable(m)) => assert!(m.starts_with("3 attempts failed")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
