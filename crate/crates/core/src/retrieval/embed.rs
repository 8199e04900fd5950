use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::jsonpath;
use crate::llm::{HttpTransport, ReqwestTransport, TransportError};
use crate::text::word_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("embedding provider: {0}")]
    Transport(String),
    #[error("embedding provider returned HTTP {status}")]
    Http { status: u16 },
    #[error("embedding response: {0}")]
    InvalidResponse(String),
    #[error("expected {expected}-dimensional vectors, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding of text {index} has zero norm")]
    ZeroNorm { index: usize },
    #[error("credential variable {0} is not set")]
    Credential(String),
}

/// Maps texts to unit-norm vectors of a fixed dimension.
pub trait Embedder: Send + Sync {
    /// Stable identifier recorded in persisted indices.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
        Ok(self.embed(&[text])?.pop().expect("one vector per text"))
    }
}

/// Scale `v` to unit Euclidean norm (accumulated in f64).
pub fn normalize(v: &mut [f32]) -> bool {
    let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return false;
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / norm) as f32;
    }
    true
}

pub const FALLBACK_DIM: usize = 256;
pub const NGRAM_RANGE: std::ops::RangeInclusive<usize> = 3..=5;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Offline embedder: signed feature hashing of character 3- to 5-grams of
/// each `<word>`. Texts with no word characters hash as the single
/// feature `<>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramEmbedder {
    dim: usize,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        HashedNgramEmbedder { dim: FALLBACK_DIM }
    }
}

impl HashedNgramEmbedder {
    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedNgramEmbedder { dim }
    }

    fn add(&self, v: &mut [f32], feature: &str) {
        let h = fnv1a(feature.as_bytes());
        let idx = (h % self.dim as u64) as usize;
        v[idx] += if h >> 63 == 1 { -1.0 } else { 1.0 };
    }

    pub fn vector(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f32; self.dim];
        let mut any = false;
        let mut buf = String::new();
        for token in word_tokens(text) {
            let wrapped: Vec<char> = format!("<{token}>").chars().collect();
            for n in NGRAM_RANGE {
                for w in wrapped.windows(n) {
                    buf.clear();
                    buf.extend(w);
                    self.add(&mut v, &buf);
                    any = true;
                }
            }
        }
        if !any {
            self.add(&mut v, "<>");
        }
        if !normalize(&mut v) {
            // Features cancelled out exactly; fall back to the empty-text vector.
            v.iter_mut().for_each(|x| *x = 0.0);
            self.add(&mut v, "<>");
            normalize(&mut v);
        }
        v
    }
}

impl Embedder for HashedNgramEmbedder {
    fn id(&self) -> String {
        format!("hashed-ngram-3-5-d{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEmbedConfig {
    pub endpoint: String,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Request field carrying the list of texts.
    #[serde(default = "default_input_field")]
    pub input_field: String,
    /// Path of the vectors in the response; `*` iterates an array.
    #[serde(default = "default_vectors_field")]
    pub response_field: String,
    pub dim: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_retries")]
    pub retry_budget: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn default_input_field() -> String {
    "input".into()
}
fn default_vectors_field() -> String {
    "data.*.embedding".into()
}
fn default_batch() -> usize {
    32
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_timeout() -> u64 {
    60_000
}

impl RemoteEmbedConfig {
    pub fn new(endpoint: impl Into<String>, dim: usize) -> Self {
        RemoteEmbedConfig {
            endpoint: endpoint.into(),
            model: None,
            api_key_env: None,
            input_field: default_input_field(),
            response_field: default_vectors_field(),
            dim,
            batch_size: default_batch(),
            retry_budget: default_retries(),
            backoff_base_ms: default_backoff(),
            timeout_ms: default_timeout(),
        }
    }
}

/// HTTP embedding provider, batched, with retry on 429/5xx/timeouts.
pub struct RemoteEmbedder {
    config: RemoteEmbedConfig,
    transport: Box<dyn HttpTransport>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedConfig) -> Self {
        Self::with_transport(config, ReqwestTransport::default())
    }

    pub fn with_transport(config: RemoteEmbedConfig, transport: impl HttpTransport + 'static) -> Self {
        RemoteEmbedder {
            config,
            transport: Box::new(transport),
        }
    }

    fn post_batch(&self, batch: &[&str], headers: &[(String, String)]) -> Result<Value, EmbedError> {
        let mut body = json!({ self.config.input_field.as_str(): batch });
        if let Some(model) = &self.config.model {
            body["model"] = Value::String(model.clone());
        }
        let timeout = Duration::from_millis(self.config.timeout_ms);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = self.transport.post_json(&self.config.endpoint, headers, &body, timeout);
            let (transient, err) = match result {
                Ok(r) if (200..300).contains(&r.status) => {
                    return serde_json::from_str(&r.body)
                        .map_err(|e| EmbedError::InvalidResponse(e.to_string()));
                }
                Ok(r) => (
                    r.status == 429 || r.status >= 500,
                    EmbedError::Http { status: r.status },
                ),
                Err(TransportError::Timeout) => (true, EmbedError::Transport("timed out".into())),
                Err(TransportError::Other(m)) => (true, EmbedError::Transport(m)),
            };
            if !transient || attempt > self.config.retry_budget {
                return Err(err);
            }
            let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(20));
            std::thread::sleep(Duration::from_millis(delay));
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!(
            "remote:{}:{}",
            self.config.model.as_deref().unwrap_or("default"),
            self.config.dim
        )
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let mut headers = vec![("content-type".to_string(), "application/json".to_string())];
        if let Some(var) = &self.config.api_key_env {
            let key = std::env::var(var).map_err(|_| EmbedError::Credential(var.clone()))?;
            headers.push(("authorization".into(), format!("Bearer {key}")));
        }
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.config.batch_size.max(1)) {
            let body = self.post_batch(batch, &headers)?;
            let vectors = jsonpath::select(&body, &self.config.response_field);
            if vectors.len() != batch.len() {
                return Err(EmbedError::InvalidResponse(format!(
                    "{} vectors for {} texts",
                    vectors.len(),
                    batch.len()
                )));
            }
            for v in vectors {
                let values: Vec<f32> = v
                    .as_array()
                    .and_then(|a| a.iter().map(|x| x.as_f64().map(|f| f as f32)).collect())
                    .ok_or_else(|| EmbedError::InvalidResponse("vector is not a number array".into()))?;
                if values.len() != self.config.dim {
                    return Err(EmbedError::DimMismatch {
                        expected: self.config.dim,
                        got: values.len(),
                    });
                }
                let mut values = values;
                if !normalize(&mut values) {
                    return Err(EmbedError::ZeroNorm { index: out.len() });
                }
                out.push(values);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::HttpResponse;
    use std::sync::Mutex;

    fn dot(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
    }

    #[test]
    fn fallback_is_deterministic_and_unit_norm() {
        let e = HashedNgramEmbedder::default();
        for text in ["offline mode broken", "", "!!!", "a", "日本語のレビュー"] {
            let v = e.vector(text);
            assert_eq!(v, e.vector(text));
            assert!((dot(&v, &v) - 1.0).abs() < 1e-6, "{text:?}");
        }
    }

    #[test]
    fn fallback_reflects_surface_similarity() {
        let e = HashedNgramEmbedder::default();
        let a = e.vector("offline mode broken");
        let b = e.vector("offline mode is broken");
        let c = e.vector("great playlists");
        assert!(dot(&a, &b) > dot(&a, &c));
    }

    struct Script(Mutex<Vec<HttpResponse>>);

    impl HttpTransport for Script {
        fn post_json(
            &self,
            _: &str,
            _: &[(String, String)],
            body: &Value,
            _: Duration,
        ) -> Result<HttpResponse, TransportError> {
            assert!(body["input"].is_array());
            Ok(self.0.lock().unwrap().remove(0))
        }
    }

    #[test]
    fn remote_batches_retries_and_normalizes() {
        let mut cfg = RemoteEmbedConfig::new("http://x", 2);
        cfg.batch_size = 2;
        cfg.backoff_base_ms = 0;
        let script = Script(Mutex::new(vec![
            HttpResponse { status: 503, body: String::new() },
            HttpResponse {
                status: 200,
                body: r#"{"data":[{"embedding":[3,4]},{"embedding":[0,2]}]}"#.into(),
            },
            HttpResponse {
                status: 200,
                body: r#"{"data":[{"embedding":[1,0]}]}"#.into(),
            },
        ]));
        let e = RemoteEmbedder::with_transport(cfg, script);
        let v = e.embed(&["a", "b", "c"]).unwrap();
        assert_eq!(v, vec![vec![0.6, 0.8], vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn remote_rejects_wrong_dimension() {
        let script = Script(Mutex::new(vec![HttpResponse {
            status: 200,
            body: r#"{"data":[{"embedding":[1,2,3]}]}"#.into(),
        }]));
        let e = RemoteEmbedder::with_transport(RemoteEmbedConfig::new("http://x", 2), script);
        assert_eq!(
            e.embed(&["a"]),
            Err(EmbedError::DimMismatch { expected: 2, got: 3 })
        );
    }
}
