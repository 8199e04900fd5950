use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::audit::{AuditLog, ChatExchange};
use super::backend::{BackendError, BackendKind, ChatBackend};
use super::parse::{parse_structured, ParseError};
use super::template::{Decoding, Message, OutputSchema, PromptTemplate, Record, RenderError, Variables};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayLimits {
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    /// Retries after the first attempt, for transient failures only.
    #[serde(default = "default_retries")]
    pub retry_budget: u32,
    /// Delay before retry `n` (1-based) is `backoff_base_ms * 2^(n-1)`.
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
}

fn default_concurrency() -> usize {
    4
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    500
}

impl Default for GatewayLimits {
    fn default() -> Self {
        GatewayLimits {
            max_concurrent: default_concurrency(),
            retry_budget: default_retries(),
            backoff_base_ms: default_backoff(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("no fixture for request digest {digest}")]
    MissingFixture { digest: String },
    #[error("timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("rate limit persisted through {attempts} attempts")]
    RateLimitExhausted { attempts: u32 },
    #[error("backend failed after {attempts} attempts: {source}")]
    Backend {
        attempts: u32,
        #[source]
        source: BackendError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub exchange_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredOutput {
    pub record: Record,
    pub response_text: String,
    pub exchange_ids: Vec<u64>,
    pub repaired: bool,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InvalidOutput {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Rejected(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CallError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("invalid output after repair: {after_repair} (first attempt: {first})")]
    Invalid {
        first: Box<InvalidOutput>,
        after_repair: Box<InvalidOutput>,
    },
}

/// Extra acceptance test for a schema-valid record.
pub type RecordCheck<'a> = &'a (dyn Fn(&Record) -> Result<(), String> + Sync);

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Single entry point for chat completions: bounded concurrency, retry with
/// exponential backoff and an audit record for every attempt.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    limits: GatewayLimits,
    permits: Semaphore,
    audit: Arc<AuditLog>,
}

impl Gateway {
    pub fn new(backend: impl ChatBackend + 'static, limits: GatewayLimits) -> Self {
        Self::from_arc(Arc::new(backend), limits)
    }

    pub fn from_arc(backend: Arc<dyn ChatBackend>, limits: GatewayLimits) -> Self {
        Gateway {
            backend,
            permits: Semaphore::new(limits.max_concurrent),
            limits,
            audit: Arc::new(AuditLog::new()),
        }
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = audit;
        self
    }

    pub fn audit(&self) -> &Arc<AuditLog> {
        &self.audit
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn limits(&self) -> &GatewayLimits {
        &self.limits
    }

    pub fn complete(
        &self,
        template_id: &str,
        messages: &[Message],
        decoding: &Decoding,
    ) -> Result<Completion, GatewayError> {
        let mut exchange_ids = Vec::new();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let started = Instant::now();
            let result = {
                let _permit = self.permits.acquire();
                self.backend.send(messages, decoding)
            };
            let latency_ms = started.elapsed().as_millis() as u64;
            let (response_text, token_counts, error) = match &result {
                Ok(reply) => (Some(reply.text.clone()), reply.token_counts, None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            exchange_ids.push(self.audit.append(ChatExchange {
                exchange_id: 0,
                template_id: template_id.to_string(),
                messages: messages.to_vec(),
                response_text,
                latency_ms,
                token_counts,
                attempt,
                error,
            }));
            let err = match result {
                Ok(reply) => {
                    return Ok(Completion {
                        text: reply.text,
                        exchange_ids,
                    })
                }
                Err(e) => e,
            };
            if err.is_transient() && attempt <= self.limits.retry_budget {
                let delay = self
                    .limits
                    .backoff_base_ms
                    .saturating_mul(1u64 << (attempt - 1).min(20));
                log::debug!("{template_id}: attempt {attempt} failed ({err}), retrying in {delay} ms");
                std::thread::sleep(Duration::from_millis(delay));
                continue;
            }
            return Err(match err {
                BackendError::MissingFixture { digest } => GatewayError::MissingFixture { digest },
                BackendError::Timeout => GatewayError::Timeout { attempts: attempt },
                BackendError::RateLimited => GatewayError::RateLimitExhausted { attempts: attempt },
                source => GatewayError::Backend {
                    attempts: attempt,
                    source,
                },
            });
        }
    }

    /// Render `template`, call the backend and parse the reply against the
    /// template's schema, with one repair re-prompt on failure.
    pub fn call_structured(
        &self,
        template: &PromptTemplate,
        variables: &Variables,
    ) -> Result<StructuredOutput, CallError> {
        self.call_structured_checked(template, variables, &|_| Ok(()))
    }

    pub fn call_structured_checked(
        &self,
        template: &PromptTemplate,
        variables: &Variables,
        check: RecordCheck<'_>,
    ) -> Result<StructuredOutput, CallError> {
        let messages = template.render(variables)?;
        self.converse_structured(
            &template.template_id,
            &template.output_schema,
            &template.decoding,
            messages,
            check,
        )
    }

    /// Structured call over an explicit message list.
    pub fn converse_structured(
        &self,
        template_id: &str,
        schema: &OutputSchema,
        decoding: &Decoding,
        mut messages: Vec<Message>,
        check: RecordCheck<'_>,
    ) -> Result<StructuredOutput, CallError> {
        let first = self.complete(template_id, &messages, decoding)?;
        let first_err = match interpret(&first.text, schema, check) {
            Ok(record) => {
                return Ok(StructuredOutput {
                    record,
                    response_text: first.text,
                    exchange_ids: first.exchange_ids,
                    repaired: false,
                })
            }
            Err(e) => e,
        };
        messages.push(Message::assistant(first.text));
        messages.push(Message::user(repair_prompt(&first_err, schema)));
        let second = self.complete(template_id, &messages, decoding)?;
        let mut exchange_ids = first.exchange_ids;
        exchange_ids.extend(&second.exchange_ids);
        match interpret(&second.text, schema, check) {
            Ok(record) => Ok(StructuredOutput {
                record,
                response_text: second.text,
                exchange_ids,
                repaired: true,
            }),
            Err(after_repair) => Err(CallError::Invalid {
                first: Box::new(first_err),
                after_repair: Box::new(after_repair),
            }),
        }
    }
}

fn interpret(text: &str, schema: &OutputSchema, check: RecordCheck<'_>) -> Result<Record, InvalidOutput> {
    let record = parse_structured(text, schema)?;
    check(&record).map_err(InvalidOutput::Rejected)?;
    Ok(record)
}

/// The corrective follow-up sent after an unusable reply.
pub fn repair_prompt(error: &InvalidOutput, schema: &OutputSchema) -> String {
    format!(
        "Your previous reply could not be used: {error}. Reply again with only a JSON object with these fields: {}.",
        schema.describe()
    )
}
