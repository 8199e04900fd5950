use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::template::{Decoding, Message};
use crate::jsonpath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenCounts {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub text: String,
    pub token_counts: Option<TokenCounts>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("no fixture for request digest {digest}")]
    MissingFixture { digest: String },
    #[error("rate limited")]
    RateLimited,
    #[error("server error (HTTP {status})")]
    Server { status: u16 },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("unusable response: {0}")]
    InvalidResponse(String),
    #[error("credential variable {0} is not set")]
    Credential(String),
}

impl BackendError {
    /// Errors worth retrying after a pause.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            BackendError::RateLimited
                | BackendError::Server { .. }
                | BackendError::Timeout
                | BackendError::Transport(_)
        )
    }
}

pub trait ChatBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn send(&self, messages: &[Message], decoding: &Decoding) -> Result<ChatReply, BackendError>;
}

/// Hex SHA-256 of the serialized message list; the fixture lookup key.
pub fn digest_messages(messages: &[Message]) -> String {
    let bytes = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture file: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub digest: String,
    pub response: String,
}

/// Digest to canned response, stored as JSONL `{"digest", "response"}`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureTable {
    responses: BTreeMap<String, String>,
}

impl FixtureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse_jsonl(text: &str) -> Result<FixtureTable, FixtureError> {
        let mut table = FixtureTable::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureRecord =
                serde_json::from_str(line).map_err(|e| FixtureError::Malformed {
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            table.responses.insert(rec.digest, rec.response);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<FixtureTable, FixtureError> {
        Self::parse_jsonl(&std::fs::read_to_string(path)?)
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (digest, response) in &self.responses {
            let rec = FixtureRecord {
                digest: digest.clone(),
                response: response.clone(),
            };
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn insert(&mut self, digest: impl Into<String>, response: impl Into<String>) {
        self.responses.insert(digest.into(), response.into());
    }

    /// Register `response` for exactly this message list.
    pub fn record(&mut self, messages: &[Message], response: impl Into<String>) {
        self.insert(digest_messages(messages), response);
    }

    /// Add every entry of `other`; its responses win on equal digests.
    pub fn extend(&mut self, other: FixtureTable) {
        self.responses.extend(other.responses);
    }

    pub fn get(&self, digest: &str) -> Option<&str> {
        self.responses.get(digest).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// Offline backend answering from a [`FixtureTable`].
#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    fixtures: FixtureTable,
}

impl StubBackend {
    pub fn new(fixtures: FixtureTable) -> Self {
        StubBackend { fixtures }
    }

    pub fn fixtures(&self) -> &FixtureTable {
        &self.fixtures
    }
}

impl ChatBackend for StubBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Stub
    }

    fn send(&self, messages: &[Message], _decoding: &Decoding) -> Result<ChatReply, BackendError> {
        let digest = digest_messages(messages);
        match self.fixtures.get(&digest) {
            Some(text) => Ok(ChatReply {
                text: text.to_string(),
                token_counts: None,
            }),
            None => Err(BackendError::MissingFixture { digest }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("{0}")]
    Other(String),
}

/// Minimal JSON-over-HTTP POST, so remote calls can be scripted in tests.
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

/// [`HttpTransport`] over a blocking reqwest client, created on first use.
#[derive(Default)]
pub struct ReqwestTransport {
    client: OnceLock<reqwest::blocking::Client>,
}

impl HttpTransport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let client = self.client.get_or_init(reqwest::blocking::Client::new);
        let mut req = client.post(url).timeout(timeout).json(body);
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Other(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| TransportError::Other(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default)]
    pub model: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Path of the reply text inside the response JSON.
    #[serde(default = "default_response_field")]
    pub response_field: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_response_field() -> String {
    "choices.0.message.content".into()
}

fn default_timeout_ms() -> u64 {
    60_000
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: None,
            api_key_env: None,
            response_field: default_response_field(),
            timeout_ms: default_timeout_ms(),
        }
    }
}

/// OpenAI-style chat-completions client.
pub struct RemoteBackend {
    config: RemoteConfig,
    transport: Box<dyn HttpTransport>,
    last_status: Mutex<Option<u16>>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        Self::with_transport(config, ReqwestTransport::default())
    }

    pub fn with_transport(config: RemoteConfig, transport: impl HttpTransport + 'static) -> Self {
        RemoteBackend {
            config,
            transport: Box::new(transport),
            last_status: Mutex::new(None),
        }
    }

    pub fn last_status(&self) -> Option<u16> {
        *self.last_status.lock().unwrap()
    }
}

impl ChatBackend for RemoteBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn send(&self, messages: &[Message], decoding: &Decoding) -> Result<ChatReply, BackendError> {
        let mut headers = vec![("content-type".to_string(), "application/json".to_string())];
        if let Some(var) = &self.config.api_key_env {
            let key = std::env::var(var).map_err(|_| BackendError::Credential(var.clone()))?;
            headers.push(("authorization".into(), format!("Bearer {key}")));
        }
        let mut body = json!({
            "messages": messages,
            "temperature": decoding.temperature,
            "max_tokens": decoding.max_tokens,
        });
        if let Some(model) = &self.config.model {
            body["model"] = Value::String(model.clone());
        }
        let resp = self
            .transport
            .post_json(
                &self.config.endpoint,
                &headers,
                &body,
                Duration::from_millis(self.config.timeout_ms),
            )
            .map_err(|e| match e {
                TransportError::Timeout => BackendError::Timeout,
                TransportError::Other(m) => BackendError::Transport(m),
            })?;
        *self.last_status.lock().unwrap() = Some(resp.status);
        match resp.status {
            200..=299 => {}
            429 => return Err(BackendError::RateLimited),
            500..=599 => return Err(BackendError::Server { status: resp.status }),
            status => {
                return Err(BackendError::Http {
                    status,
                    body: resp.body.chars().take(200).collect(),
                })
            }
        }
        let parsed: Value = serde_json::from_str(&resp.body)
            .map_err(|e| BackendError::InvalidResponse(format!("body is not JSON: {e}")))?;
        let text = jsonpath::select(&parsed, &self.config.response_field)
            .into_iter()
            .find_map(Value::as_str)
            .ok_or_else(|| {
                BackendError::InvalidResponse(format!(
                    "no string at {}",
                    self.config.response_field
                ))
            })?
            .to_string();
        let usage = |k: &str| parsed.get("usage").and_then(|u| u.get(k)).and_then(Value::as_u64);
        let token_counts = match (usage("prompt_tokens"), usage("completion_tokens")) {
            (Some(prompt), Some(completion)) => Some(TokenCounts { prompt, completion }),
            _ => None,
        };
        Ok(ChatReply { text, token_counts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(u16, &'static str);

    impl HttpTransport for Fixed {
        fn post_json(
            &self,
            _: &str,
            _: &[(String, String)],
            body: &Value,
            _: Duration,
        ) -> Result<HttpResponse, TransportError> {
            assert_eq!(body["messages"][0]["role"], "user");
            Ok(HttpResponse {
                status: self.0,
                body: self.1.into(),
            })
        }
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let a = digest_messages(&[Message::user("hi")]);
        assert_eq!(a.len(), 64);
        assert_eq!(a, digest_messages(&[Message::user("hi")]));
        assert_ne!(a, digest_messages(&[Message::user("hi ")]));
        assert_ne!(a, digest_messages(&[Message::system("hi")]));
    }

    #[test]
    fn stub_answers_and_reports_missing() {
        let msgs = [Message::user("q")];
        let mut table = FixtureTable::new();
        table.record(&msgs, "a");
        let stub = StubBackend::new(table.clone());
        assert_eq!(stub.send(&msgs, &Decoding::default()).unwrap().text, "a");
        let err = stub.send(&[Message::user("other")], &Decoding::default()).unwrap_err();
        assert!(matches!(err, BackendError::MissingFixture { .. }));

        let mut buf = Vec::new();
        table.write_jsonl(&mut buf).unwrap();
        assert_eq!(FixtureTable::parse_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap(), table);
        assert!(matches!(
            FixtureTable::parse_jsonl("{}\n"),
            Err(FixtureError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn remote_maps_statuses() {
        let send = |status, body| {
            RemoteBackend::with_transport(RemoteConfig::new("http://x"), Fixed(status, body))
                .send(&[Message::user("q")], &Decoding::default())
        };
        let ok = send(
            200,
            r#"{"choices":[{"message":{"content":"hello"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#,
        )
        .unwrap();
        assert_eq!(ok.text, "hello");
        assert_eq!(ok.token_counts, Some(TokenCounts { prompt: 3, completion: 1 }));
        assert_eq!(send(429, ""), Err(BackendError::RateLimited));
        assert_eq!(send(503, ""), Err(BackendError::Server { status: 503 }));
        assert!(matches!(send(400, "bad"), Err(BackendError::Http { status: 400, .. })));
        assert!(matches!(send(200, "{}"), Err(BackendError::InvalidResponse(_))));
        assert!(!send(400, "").unwrap_err().is_transient());
        assert!(send(502, "").unwrap_err().is_transient());
    }

    #[test]
    fn missing_credential_is_reported() {
        let mut cfg = RemoteConfig::new("http://x");
        cfg.api_key_env = Some("REVIEWLENS_TEST_UNSET_KEY_VAR".into());
        let err = RemoteBackend::with_transport(cfg, Fixed(200, ""))
            .send(&[Message::user("q")], &Decoding::default())
            .unwrap_err();
        assert_eq!(err, BackendError::Credential("REVIEWLENS_TEST_UNSET_KEY_VAR".into()));
    }
}
