//! Retrieval-augmented question answering. Every answer either cites
//! snippets from its own retrieval set or is exactly [`NOT_STATED`].

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{bundled, vars, CallError, Gateway, PromptTemplate, Variables};
use crate::retrieval::{avg_cosine, retrieval_diversity, Embedder, IndexError, SearchHit, SearchResult, VectorIndex};

pub const NOT_STATED: &str = "not stated";
pub const DEFAULT_FLOOR: f64 = 0.2;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Call(#[from] CallError),
    #[error("no queries given")]
    NoQueries,
    #[error("no answers given")]
    NoAnswers,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why an answer came back as [`NOT_STATED`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Abstention {
    EmptyIndex,
    BelowFloor,
    /// The model itself said the excerpts do not answer the question.
    ModelDeclined,
    /// A citation that is not a snippet number in `1..=hits`.
    BadCitation { citation: String },
    NoCitations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub query: String,
    pub answer_text: String,
    /// Chunk ids, in the order first cited.
    pub citations: Vec<String>,
    pub retrieved: SearchResult,
    pub grounded: bool,
    pub floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstention: Option<Abstention>,
    #[serde(default)]
    pub exchange_ids: Vec<u64>,
}

impl Answer {
    fn not_stated(query: &str, retrieved: SearchResult, floor: f64, why: Abstention, exchange_ids: Vec<u64>) -> Self {
        Answer {
            query: query.to_string(),
            answer_text: NOT_STATED.to_string(),
            citations: Vec::new(),
            retrieved,
            grounded: false,
            floor,
            abstention: Some(why),
            exchange_ids,
        }
    }

    /// Scores of the cited chunks, aligned with `citations`.
    pub fn citation_scores(&self) -> Vec<f64> {
        self.citations
            .iter()
            .filter_map(|id| self.retrieved.hits.iter().find(|h| &h.chunk_id == id).map(|h| h.score))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QaSettings {
    pub k: usize,
    /// Minimum top-1 cosine before the model is consulted.
    pub floor: f64,
}

impl Default for QaSettings {
    fn default() -> Self {
        QaSettings {
            k: DEFAULT_K,
            floor: DEFAULT_FLOOR,
        }
    }
}

pub fn bundled_template() -> PromptTemplate {
    bundled::load(bundled::RAG_ANSWER)
}

/// `[n] text` per hit, one per line, numbered from 1 in rank order.
pub fn snippet_block(hits: &[SearchHit], index: &VectorIndex) -> String {
    hits.iter()
        .enumerate()
        .map(|(i, h)| {
            let text = index.chunk(&h.chunk_id).map(|c| c.text.as_str()).unwrap_or_default();
            format!("[{}] {}", i + 1, text.split_whitespace().collect::<Vec<_>>().join(" "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn answer_variables(query: &str, hits: &[SearchHit], index: &VectorIndex) -> Variables {
    let snippets = snippet_block(hits, index);
    vars([("snippets", snippets.as_str()), ("question", query)])
}

/// Snippet number from a citation such as `2`, `[2]` or `#2`.
fn snippet_number(citation: &str) -> Option<usize> {
    let digits = citation.trim().trim_start_matches(['[', '#', '(']).trim_end_matches([']', ')']);
    digits.trim().parse().ok()
}

fn is_not_stated(text: &str) -> bool {
    text.trim().trim_end_matches('.').eq_ignore_ascii_case(NOT_STATED)
}

pub fn answer(
    query: &str,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    gateway: &Gateway,
    template: &PromptTemplate,
    settings: QaSettings,
) -> Result<Answer, RagError> {
    if settings.k == 0 {
        return Err(RagError::ZeroK);
    }
    let empty = SearchResult {
        query: query.to_string(),
        hits: Vec::new(),
    };
    if index.is_empty() {
        return Ok(Answer::not_stated(query, empty, settings.floor, Abstention::EmptyIndex, Vec::new()));
    }
    let retrieved = index.search_text(query, embedder, settings.k)?;
    if retrieved.hits.first().is_none_or(|h| h.score < settings.floor) {
        return Ok(Answer::not_stated(query, retrieved, settings.floor, Abstention::BelowFloor, Vec::new()));
    }

    let out = gateway.call_structured(template, &answer_variables(query, &retrieved.hits, index))?;
    let text = out.record.text("answer").unwrap_or_default().trim().to_string();
    let raw = out.record.list("citations").unwrap_or_default();
    let ids = out.exchange_ids;
    if is_not_stated(&text) {
        return Ok(Answer::not_stated(query, retrieved, settings.floor, Abstention::ModelDeclined, ids));
    }
    let mut citations: Vec<String> = Vec::new();
    for c in raw {
        let hit = snippet_number(c)
            .filter(|&n| n >= 1)
            .and_then(|n| retrieved.hits.get(n - 1));
        let Some(hit) = hit else {
            let why = Abstention::BadCitation { citation: c.clone() };
            return Ok(Answer::not_stated(query, retrieved, settings.floor, why, ids));
        };
        if !citations.contains(&hit.chunk_id) {
            citations.push(hit.chunk_id.clone());
        }
    }
    if citations.is_empty() || text.is_empty() {
        return Ok(Answer::not_stated(query, retrieved, settings.floor, Abstention::NoCitations, ids));
    }
    let answer = Answer {
        query: query.to_string(),
        answer_text: text,
        citations,
        retrieved,
        grounded: true,
        floor: settings.floor,
        abstention: None,
        exchange_ids: ids,
    };
    debug_assert!(ground_check(&answer).is_empty());
    Ok(answer)
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Violation {
    #[error("uncited source: {chunk_id} was not retrieved")]
    UncitedSource { chunk_id: String },
    #[error("answer text without citations")]
    Unsupported,
    #[error("grounded flag disagrees with the citations")]
    GroundedFlag,
}

/// Empty when the answer is grounded in its own retrieval set or is
/// exactly [`NOT_STATED`] with no citations.
pub fn ground_check(answer: &Answer) -> Vec<Violation> {
    let mut violations: Vec<Violation> = answer
        .citations
        .iter()
        .filter(|id| !answer.retrieved.hits.iter().any(|h| &h.chunk_id == *id))
        .map(|id| Violation::UncitedSource { chunk_id: id.clone() })
        .collect();
    if answer.citations.is_empty() && answer.answer_text != NOT_STATED {
        violations.push(Violation::Unsupported);
    }
    if answer.grounded != (!answer.citations.is_empty() && violations.is_empty()) {
        violations.push(Violation::GroundedFlag);
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaMetricsRow {
    pub query: String,
    pub avg_cosine: f64,
    pub diversity: f64,
    pub k: usize,
}

pub fn qa_proxy_metrics(
    queries: &[&str],
    index: &VectorIndex,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<Vec<QaMetricsRow>, RagError> {
    if queries.is_empty() {
        return Err(RagError::NoQueries);
    }
    queries
        .iter()
        .map(|q| {
            let r = index.search_text(q, embedder, k)?;
            let metric = |e| RagError::Index(IndexError::Corrupt(format!("{e}")));
            Ok(QaMetricsRow {
                query: q.to_string(),
                avg_cosine: avg_cosine(&r).map_err(metric)?,
                diversity: retrieval_diversity(&r).map_err(metric)?,
                k,
            })
        })
        .collect()
}

pub fn write_metrics_csv(rows: &[QaMetricsRow], w: impl Write) -> Result<(), RagError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["query", "avg_cosine", "diversity", "k"])?;
    for r in rows {
        out.write_record([
            r.query.clone(),
            format!("{:.3}", r.avg_cosine),
            format!("{:.3}", r.diversity),
            r.k.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct AnswerRow<'a> {
    query: &'a str,
    answer_text: &'a str,
    citations: &'a [String],
    scores: Vec<f64>,
    grounded: bool,
}

/// One JSON object per line: `query, answer_text, citations, scores,
/// grounded`, with `scores` aligned to `citations`.
pub fn write_answers_jsonl(answers: &[Answer], mut w: impl Write) -> Result<(), RagError> {
    for a in answers {
        let row = AnswerRow {
            query: &a.query,
            answer_text: &a.answer_text,
            citations: &a.citations,
            scores: a.citation_scores(),
            grounded: a.grounded,
        };
        serde_json::to_writer(&mut w, &row).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub const JUDGEMENT_COLUMNS: [&str; 3] = ["reflects_citations", "covers_main_points", "readable"];

/// CSV for manual review: cited snippet texts are joined with a blank line,
/// and the three judgement columns are left empty.
pub fn write_annotation_sheet(answers: &[Answer], index: &VectorIndex, w: impl Write) -> Result<(), RagError> {
    if answers.is_empty() {
        return Err(RagError::NoAnswers);
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["query", "answer_text", "cited_chunk_ids", "cited_snippets"];
    header.extend(JUDGEMENT_COLUMNS);
    out.write_record(&header)?;
    let texts: HashMap<&str, &str> = index
        .chunks()
        .iter()
        .map(|c| (c.chunk_id.as_str(), c.text.as_str()))
        .collect();
    for a in answers {
        let snippets = a
            .citations
            .iter()
            .map(|id| texts.get(id.as_str()).copied().unwrap_or_default())
            .collect::<Vec<_>>()
            .join("\n\n");
        out.write_record([
            a.query.as_str(),
            a.answer_text.as_str(),
            a.citations.join(";").as_str(),
            snippets.as_str(),
            "",
            "",
            "",
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{FixtureTable, GatewayLimits, StubBackend};
    use crate::retrieval::{Chunk, HashedNgramEmbedder};

    fn corpus() -> VectorIndex {
        let texts = [
            "app crashes every time I open a playlist",
            "love the discover weekly recommendations",
            "the app randomly crashes and freezes on startup",
            "podcast episodes will not download",
            "ads are too loud between songs",
        ];
        let chunks = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Chunk {
                chunk_id: format!("r{i}#0"),
                review_id: format!("r{i}"),
                text: t.to_string(),
                char_offset: 0,
            })
            .collect();
        VectorIndex::build(chunks, &HashedNgramEmbedder::default()).unwrap()
    }

    fn gateway_answering(index: &VectorIndex, query: &str, k: usize, reply: &str) -> Gateway {
        let emb = HashedNgramEmbedder::default();
        let hits = index.search_text(query, &emb, k).unwrap().hits;
        let mut table = FixtureTable::new();
        table.record(&bundled_template().render(&answer_variables(query, &hits, index)).unwrap(), reply);
        Gateway::new(StubBackend::new(table), GatewayLimits::default())
    }

    const QUERY: &str = "does the app crash or freeze";

    #[test]
    fn cited_snippets_resolve_to_chunks() {
        let idx = corpus();
        let gw = gateway_answering(&idx, QUERY, 3, r#"{"answer":"It crashes and freezes.","citations":["1","3","1"]}"#);
        let settings = QaSettings { k: 3, floor: 0.0 };
        let a = answer(QUERY, &idx, &HashedNgramEmbedder::default(), &gw, &bundled_template(), settings).unwrap();
        assert!(a.grounded);
        assert_eq!(a.citations, [a.retrieved.hits[0].chunk_id.clone(), a.retrieved.hits[2].chunk_id.clone()]);
        assert!(ground_check(&a).is_empty());
        assert_eq!(a.exchange_ids, [1]);
        assert_eq!(gw.audit().len(), 1);
    }

    #[test]
    fn out_of_range_citation_abstains() {
        let idx = corpus();
        let gw = gateway_answering(&idx, QUERY, 2, r#"{"answer":"It crashes.","citations":["[4]"]}"#);
        let settings = QaSettings { k: 2, floor: 0.0 };
        let a = answer(QUERY, &idx, &HashedNgramEmbedder::default(), &gw, &bundled_template(), settings).unwrap();
        assert_eq!(a.answer_text, NOT_STATED);
        assert!(!a.grounded && a.citations.is_empty());
        assert_eq!(a.abstention, Some(Abstention::BadCitation { citation: "[4]".into() }));
    }

    #[test]
    fn uncited_text_abstains() {
        let idx = corpus();
        let gw = gateway_answering(&idx, QUERY, 2, r#"{"answer":"It crashes.","citations":[]}"#);
        let settings = QaSettings { k: 2, floor: 0.0 };
        let a = answer(QUERY, &idx, &HashedNgramEmbedder::default(), &gw, &bundled_template(), settings).unwrap();
        assert_eq!((a.answer_text.as_str(), a.abstention), (NOT_STATED, Some(Abstention::NoCitations)));
    }

    #[test]
    fn floor_and_empty_index_skip_the_model() {
        let gw = Gateway::new(StubBackend::new(FixtureTable::new()), GatewayLimits::default());
        let emb = HashedNgramEmbedder::default();
        let empty = VectorIndex::new(emb.dim(), emb.id());
        let a = answer(QUERY, &empty, &emb, &gw, &bundled_template(), QaSettings::default()).unwrap();
        assert_eq!((a.answer_text.as_str(), a.grounded), (NOT_STATED, false));
        let a = answer(QUERY, &corpus(), &emb, &gw, &bundled_template(), QaSettings { k: 3, floor: 1.01 }).unwrap();
        assert_eq!(a.abstention, Some(Abstention::BelowFloor));
        assert_eq!(gw.audit().len(), 0);
    }

    #[test]
    fn ground_check_violations() {
        let hit = SearchHit {
            chunk_id: "a#0".into(),
            review_id: "a".into(),
            score: 0.9,
        };
        let mut a = Answer {
            query: "q".into(),
            answer_text: "yes".into(),
            citations: vec!["a#0".into()],
            retrieved: SearchResult {
                query: "q".into(),
                hits: vec![hit],
            },
            grounded: true,
            floor: 0.2,
            abstention: None,
            exchange_ids: vec![],
        };
        assert!(ground_check(&a).is_empty());
        a.citations.push("b#0".into());
        assert_eq!(ground_check(&a)[0], Violation::UncitedSource { chunk_id: "b#0".into() });
        assert_eq!(ground_check(&a)[0].to_string(), "uncited source: b#0 was not retrieved");
        a.citations.clear();
        a.grounded = false;
        assert_eq!(ground_check(&a), [Violation::Unsupported]);
    }

    #[test]
    fn proxy_metrics_and_exports() {
        let idx = corpus();
        let emb = HashedNgramEmbedder::default();
        let rows = qa_proxy_metrics(&[QUERY, "ads"], &idx, &emb, 1).unwrap();
        assert!(rows.iter().all(|r| r.diversity == 1.0 && r.k == 1));
        let rows = qa_proxy_metrics(&[QUERY], &idx, &emb, 5).unwrap();
        assert_eq!(rows[0].diversity, 1.0);
        assert!(matches!(qa_proxy_metrics(&[], &idx, &emb, 5), Err(RagError::NoQueries)));

        let gw = gateway_answering(&idx, QUERY, 3, r#"{"answer":"It crashes.","citations":["1","2"]}"#);
        let a = answer(QUERY, &idx, &emb, &gw, &bundled_template(), QaSettings { k: 3, floor: 0.0 }).unwrap();
        let mut sheet = Vec::new();
        write_annotation_sheet(std::slice::from_ref(&a), &idx, &mut sheet).unwrap();
        let mut reader = csv::Reader::from_reader(sheet.as_slice());
        assert_eq!(reader.headers().unwrap().len(), 7);
        let row = reader.records().next().unwrap().unwrap();
        for id in &a.citations {
            assert!(row[3].contains(idx.chunk(id).unwrap().text.as_str()));
        }
        assert!((4..7).all(|i| row[i].is_empty()));
        assert!(matches!(write_annotation_sheet(&[], &idx, Vec::new()), Err(RagError::NoAnswers)));

        let mut jsonl = Vec::new();
        write_answers_jsonl(std::slice::from_ref(&a), &mut jsonl).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&jsonl).unwrap();
        assert_eq!(v["scores"].as_array().unwrap().len(), 2);
        assert_eq!(v["grounded"], true);
    }
}
