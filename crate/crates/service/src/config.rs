//! Run configuration: one TOML file. Relative paths resolve against the
//! file's directory; the hash covers the file's parsed content, so it is
//! stable across machines.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use reviewlens_core::aspects::{MatchPolicy, PipelineSettings, SentimentMode};
use reviewlens_core::corpus::SchemaMapping;
use reviewlens_core::llm::{GatewayLimits, RemoteConfig};
use reviewlens_core::ragqa::QaSettings;
use reviewlens_core::retrieval::{ChunkConfig, RemoteEmbedConfig, FALLBACK_DIM};
use reviewlens_core::topics::TopicSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    #[serde(default = "default_text")]
    pub text: String,
    #[serde(default = "default_rating")]
    pub rating: String,
    #[serde(default)]
    pub review_id: Option<String>,
    #[serde(default)]
    pub app_id: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default = "yes")]
    pub deduplicate: bool,
    #[serde(default = "yes")]
    pub english_only: bool,
}

fn default_text() -> String {
    "text".into()
}
fn default_rating() -> String {
    "rating".into()
}
fn yes() -> bool {
    true
}

impl CorpusSection {
    pub fn schema(&self) -> SchemaMapping {
        SchemaMapping {
            text: self.text.clone(),
            rating: self.rating.clone(),
            review_id: self.review_id.clone(),
            app_id: self.app_id.clone(),
            timestamp: self.timestamp.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconSection {
    /// Replaces the bundled lexicon when set.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub emoji: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSection {
    Stub { fixtures: PathBuf },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingSection {
    Hashed {
        #[serde(default = "fallback_dim")]
        dim: usize,
    },
    Remote(RemoteEmbedConfig),
}

fn fallback_dim() -> usize {
    FALLBACK_DIM
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection::Hashed { dim: FALLBACK_DIM }
    }
}

/// Template overrides; unset entries use the bundled templates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatesSection {
    pub aspect_extract: Option<PathBuf>,
    pub aspect_sentiment: Option<PathBuf>,
    pub recommend: Option<PathBuf>,
    pub topic_label: Option<PathBuf>,
    pub topic_summary: Option<PathBuf>,
    pub rag_answer: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectInput {
    /// Sentences of the gold file.
    #[default]
    Gold,
    /// Whole review texts.
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AspectsSection {
    #[serde(default)]
    pub input: AspectInput,
    #[serde(default)]
    pub gold: Option<PathBuf>,
    #[serde(default = "default_consistency")]
    pub consistency_threshold: f64,
    /// Process at most this many sentences.
    #[serde(default)]
    pub limit: Option<usize>,
}

fn default_consistency() -> f64 {
    PipelineSettings::default().consistency_threshold
}

impl Default for AspectsSection {
    fn default() -> Self {
        AspectsSection {
            input: AspectInput::default(),
            gold: None,
            consistency_threshold: default_consistency(),
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaSection {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// One query per line; blank lines and `#` comments are skipped.
    #[serde(default)]
    pub queries: Option<PathBuf>,
}

fn default_k() -> usize {
    QaSettings::default().k
}
fn default_floor() -> f64 {
    QaSettings::default().floor
}

impl Default for QaSection {
    fn default() -> Self {
        QaSection {
            k: default_k(),
            floor: default_floor(),
            queries: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default)]
    pub match_policy: MatchPolicy,
    #[serde(default)]
    pub sentiment_mode: SentimentMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    #[serde(default = "default_bind")]
    pub bind: String,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection { bind: default_bind() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub corpus: CorpusSection,
    pub backend: BackendSection,
    #[serde(default)]
    pub gateway: GatewayLimits,
    #[serde(default)]
    pub lexicon: LexiconSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub chunking: ChunkConfig,
    #[serde(default)]
    pub templates: TemplatesSection,
    #[serde(default)]
    pub aspects: AspectsSection,
    #[serde(default)]
    pub topics: TopicSettings,
    #[serde(default)]
    pub qa: QaSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub service: ServiceSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::parse(&text, &base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Parse and validate; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Config, ConfigError> {
        let mut config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.corpus.text.trim().is_empty() {
            return Err(invalid("corpus.text", "column name is empty"));
        }
        if self.corpus.rating.trim().is_empty() {
            return Err(invalid("corpus.rating", "column name is empty"));
        }
        self.chunking
            .validate()
            .map_err(|e| invalid("chunking", e.to_string()))?;
        if self.gateway.max_concurrent == 0 {
            return Err(invalid("gateway.max_concurrent", "must be at least 1"));
        }
        if self.qa.k == 0 {
            return Err(invalid("qa.k", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.qa.floor) {
            return Err(invalid("qa.floor", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.aspects.consistency_threshold) {
            return Err(invalid("aspects.consistency_threshold", "must lie in [0, 1]"));
        }
        if self.topics.target_dim == 0 {
            return Err(invalid("topics.target_dim", "must be at least 1"));
        }
        if self.topics.min_cluster_size < 2 {
            return Err(invalid("topics.min_cluster_size", "must be at least 2"));
        }
        if self.topics.summary_docs == 0 {
            return Err(invalid("topics.summary_docs", "must be at least 1"));
        }
        match &self.embedding {
            EmbeddingSection::Hashed { dim } if *dim == 0 => {
                return Err(invalid("embedding.dim", "must be at least 1"));
            }
            EmbeddingSection::Remote(r) if r.dim == 0 => {
                return Err(invalid("embedding.dim", "must be at least 1"));
            }
            _ => {}
        }
        if self.service.bind.parse::<std::net::SocketAddr>().is_err() {
            return Err(invalid("service.bind", format!("{:?} is not a socket address", self.service.bind)));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))[..12].to_string()
    }

    pub fn pipeline_settings(&self) -> PipelineSettings {
        PipelineSettings {
            consistency_threshold: self.aspects.consistency_threshold,
        }
    }

    pub fn qa_settings(&self) -> QaSettings {
        QaSettings {
            k: self.qa.k,
            floor: self.qa.floor,
        }
    }
}
