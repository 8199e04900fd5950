//! Provider-agnostic chat completion: templates, structured output, retries,
//! auditing, chaining and an offline fixture backend.

mod audit;
pub mod bundled;
mod backend;
mod chain;
mod gateway;
mod optimize;
mod parse;
mod template;

pub use audit::{AuditLog, ChatExchange};
pub use backend::{
    digest_messages, BackendError, BackendKind, ChatBackend, ChatReply, FixtureError, FixtureRecord,
    FixtureTable, HttpResponse, HttpTransport, RemoteBackend, RemoteConfig, ReqwestTransport,
    StubBackend, TokenCounts, TransportError,
};
pub use chain::{chain, Adapter, ChainError, ChainOutcome, ChainStep};
pub use gateway::{
    repair_prompt, CallError, Completion, Gateway, GatewayError, GatewayLimits, InvalidOutput,
    RecordCheck, StructuredOutput,
};
pub use optimize::{
    refine_template, score_template, select_template, FailureCase, OptimizeError, Scorer, Selection,
    TemplateScore,
};
pub use parse::{parse_structured, validate_object, ParseError};
pub use template::{
    fill, placeholders, render_prompt, vars, Decoding, FewShotExample, FieldKind, FieldSpec,
    FieldValue, Message, OutputSchema, PromptTemplate, Record, RenderError, Role, TemplateError,
    Variables,
};
