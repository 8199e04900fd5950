//! Stub fixture synthesis for offline runs.
//!
//! The stub backend answers by message digest, so a fixture file has to be
//! built from the exact prompts the pipeline will send. This module replays
//! the deterministic parts of the pipeline (ingest, index, topic discovery,
//! retrieval) and records a canned reply for every prompt they produce:
//!
//! * aspects: replies taken from an answer key (see [`AnswerKeyEntry`]);
//! * topics: a label made of the top keywords and a one-line summary;
//! * QA: an extractive answer quoting the top snippet and citing it.
//!
//! Fixtures depend on the config, the templates and the corpus. Regenerate
//! them whenever any of those change.

use std::path::Path;
use std::sync::Arc;

use reviewlens_core::aspects::{answer_key_fixtures, AnswerKeyEntry};
use reviewlens_core::llm::{FixtureTable, StubBackend};
use reviewlens_core::ragqa::answer_variables;
use reviewlens_core::retrieval::{chunk_corpus, VectorIndex};
use reviewlens_core::topics::{
    discover_topics, label_variables, summary_variables, title_case, topic_prompt_inputs, PcaReducer,
};

use crate::config::Config;
use crate::pipeline::{ingest, read_queries, PipelineError, Resources};

pub fn load_answer_key(path: &Path) -> Result<Vec<AnswerKeyEntry>, PipelineError> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// First sentence of `text`, whitespace collapsed.
fn first_sentence(text: &str) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    match flat.find(['.', '!', '?']) {
        Some(i) => flat[..=i].to_string(),
        None => flat,
    }
}

/// Fixtures for every LLM call a full run of `config` makes, given the
/// aspect answer key.
pub fn synthesize(config: &Config, key: &[AnswerKeyEntry]) -> Result<FixtureTable, PipelineError> {
    let res = Resources::with_backend(config, Arc::new(StubBackend::default()))?;
    let mut table =
        answer_key_fixtures(key, &res.aspect_templates, &res.lexicon, config.pipeline_settings())?;

    let corpus = ingest(config)?.corpus;
    let index = VectorIndex::build(chunk_corpus(&corpus, config.chunking)?, res.embedder.as_ref())?;
    if !index.is_empty() {
        if let Ok(model) = discover_topics(&index, &PcaReducer, config.topics) {
            for input in topic_prompt_inputs(&model, &index) {
                let label = title_case(&input.keywords.iter().take(3).cloned().collect::<Vec<_>>().join(" "));
                let messages = res.topic_templates.label.render(&label_variables(&input.keywords))?;
                table.record(&messages, serde_json::json!({ "label": label }).to_string());

                let docs: Vec<&str> = input.documents.iter().map(String::as_str).collect();
                let summary = format!(
                    "Reviewers in this group talk about {}. A typical comment: {}",
                    input.keywords.iter().take(3).cloned().collect::<Vec<_>>().join(", "),
                    docs.first().map(|d| first_sentence(d)).unwrap_or_default()
                );
                let messages = res.topic_templates.summary.render(&summary_variables(&docs))?;
                table.record(&messages, serde_json::json!({ "summary": summary }).to_string());
            }
        }
    }

    if let Some(path) = &config.qa.queries {
        let settings = config.qa_settings();
        for query in read_queries(&config.resolve(path))? {
            if index.is_empty() {
                break;
            }
            let hits = index.search_text(&query, res.embedder.as_ref(), settings.k)?.hits;
            let Some(top) = hits.first() else { continue };
            if top.score < settings.floor {
                continue;
            }
            let text = index.chunk(&top.chunk_id).map(|c| first_sentence(&c.text)).unwrap_or_default();
            let messages = res.rag_template.render(&answer_variables(&query, &hits, &index))?;
            let reply = serde_json::json!({ "answer": text, "citations": ["1"] });
            table.record(&messages, reply.to_string());
        }
    }
    Ok(table)
}
