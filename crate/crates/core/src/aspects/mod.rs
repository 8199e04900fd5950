//! Aspect extraction, per-aspect sentiment, recommendation mining and the
//! evaluation harness for all three.

mod eval;
mod gold;

pub use eval::{
    evaluate_extraction, evaluate_sentiment, match_terms, sentiment_distribution, term_overlap,
    ClassMetrics, EvalError, ExtractionReport, MatchPolicy, SentimentDistribution, SentimentMode,
    SentimentReport, WeightedMetrics,
};
pub use gold::{load_gold, parse_gold, GoldAnnotation, GoldAspect, GoldError};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{
    bundled, vars, CallError, FixtureTable, Gateway, Message, PromptTemplate, Record, RenderError,
    StructuredOutput,
};
use crate::sentiment::{lexicon_label, Lexicon, Polarity, SentimentScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionSource {
    Llm,
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectMention {
    pub sentence_id: String,
    pub term: String,
    pub sentiment: Polarity,
    pub flagged: bool,
    pub source: MentionSource,
    /// Whether `term` occurs in the (lowercased) sentence.
    pub verbatim: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exchange_ids: Vec<u64>,
}

impl AspectMention {
    pub fn gold(sentence_id: &str, term: &str, sentiment: Polarity) -> Self {
        AspectMention {
            sentence_id: sentence_id.into(),
            term: normalize_term(term),
            sentiment,
            flagged: false,
            source: MentionSource::Gold,
            verbatim: true,
            exchange_ids: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub sentence_id: String,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedTerm {
    pub term: String,
    pub verbatim: bool,
}

#[derive(Debug, Error)]
pub enum AspectError {
    #[error("sentence {sentence_id}: {stage}: {source}")]
    Call {
        sentence_id: String,
        stage: &'static str,
        #[source]
        source: CallError,
    },
    #[error("predictions export: {0}")]
    Io(#[from] std::io::Error),
}

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// The three prompts the pipeline runs per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectTemplates {
    pub extract: PromptTemplate,
    pub classify: PromptTemplate,
    pub recommend: PromptTemplate,
}

impl AspectTemplates {
    pub fn bundled() -> Self {
        AspectTemplates {
            extract: bundled::load(bundled::ASPECT_EXTRACT),
            classify: bundled::load(bundled::ASPECT_SENTIMENT),
            recommend: bundled::load(bundled::RECOMMEND),
        }
    }

    pub fn ids(&self) -> [&str; 3] {
        [
            &self.extract.template_id,
            &self.classify.template_id,
            &self.recommend.template_id,
        ]
    }
}

fn list_field<'a>(record: &'a Record, template: &PromptTemplate) -> &'a [String] {
    let field = &template.output_schema.fields()[0].name;
    record.list(field).unwrap_or_default()
}

/// Aspect terms of `sentence`, normalized and deduplicated in order.
pub fn extract_aspects(
    sentence: &str,
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<(Vec<ExtractedTerm>, StructuredOutput), CallError> {
    let out = gateway.call_structured(template, &vars([("sentence", sentence)]))?;
    let haystack = normalize_term(sentence);
    let mut terms: Vec<ExtractedTerm> = Vec::new();
    for raw in list_field(&out.record, template) {
        let term = normalize_term(raw);
        if term.is_empty() || terms.iter().any(|t| t.term == term) {
            continue;
        }
        terms.push(ExtractedTerm {
            verbatim: haystack.contains(&term),
            term,
        });
    }
    Ok((terms, out))
}

fn sentiment_of(out: &StructuredOutput) -> Polarity {
    out.record
        .text("sentiment")
        .and_then(Polarity::parse)
        .expect("schema restricts sentiment to the three classes")
}

pub fn classify_aspect_sentiment(
    sentence: &str,
    term: &str,
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<(Polarity, StructuredOutput), CallError> {
    let out = gateway.call_structured(template, &vars([("sentence", sentence), ("aspect", term)]))?;
    Ok((sentiment_of(&out), out))
}

pub fn mine_recommendations(
    sentence_id: &str,
    sentence: &str,
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<(Vec<Recommendation>, StructuredOutput), CallError> {
    let out = gateway.call_structured(template, &vars([("sentence", sentence)]))?;
    let recs = list_field(&out.record, template)
        .iter()
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|p| !p.is_empty())
        .map(|phrase| Recommendation {
            sentence_id: sentence_id.into(),
            phrase,
        })
        .collect();
    Ok((recs, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consistency {
    Pass,
    Flag,
}

/// Flag when the lexicon is confident (`|compound| >= threshold`) and its
/// sign contradicts a positive or negative label. Neutral labels pass.
pub fn consistency_check(mention: &AspectMention, scores: &SentimentScores, threshold: f64) -> Consistency {
    let c = scores.compound;
    let contradicts = match mention.sentiment {
        Polarity::Positive => c < 0.0,
        Polarity::Negative => c > 0.0,
        Polarity::Neutral => false,
    };
    if contradicts && c.abs() >= threshold {
        Consistency::Flag
    } else {
        Consistency::Pass
    }
}

/// Follow-up sent when a label contradicts the lexicon.
pub fn lexicon_hint(term: &str, scores: &SentimentScores) -> String {
    format!(
        "A sentiment lexicon scores this sentence {:+.3} overall ({}). Re-examine the sentiment expressed toward \"{}\" specifically and answer again with only the JSON object.",
        scores.compound,
        lexicon_label(scores.compound),
        term
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceResult {
    pub sentence_id: String,
    pub sentence: String,
    pub mentions: Vec<AspectMention>,
    pub recommendations: Vec<Recommendation>,
    pub lexicon: SentimentScores,
    pub exchange_ids: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    /// Minimum `|compound|` for a lexicon contradiction to count.
    pub consistency_threshold: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            consistency_threshold: 0.5,
        }
    }
}

/// Extract, classify (with the lexicon cross-check) and mine recommendations.
///
/// Sentences are processed in input order so exchange ids, and therefore
/// every export, are reproducible under the stub backend.
pub struct AspectPipeline<'a> {
    pub gateway: &'a Gateway,
    pub templates: &'a AspectTemplates,
    pub lexicon: &'a Lexicon,
    pub settings: PipelineSettings,
}

impl AspectPipeline<'_> {
    pub fn run_sentence(&self, sentence_id: &str, sentence: &str) -> Result<SentenceResult, AspectError> {
        let fail = |stage: &'static str| {
            move |source| AspectError::Call {
                sentence_id: sentence_id.to_string(),
                stage,
                source,
            }
        };
        let scores = self.lexicon.polarity_scores(sentence);
        let (terms, extraction) =
            extract_aspects(sentence, self.gateway, &self.templates.extract).map_err(fail("extract"))?;
        let mut exchange_ids = extraction.exchange_ids;
        let mut mentions = Vec::with_capacity(terms.len());
        for t in terms {
            let (sentiment, out) =
                classify_aspect_sentiment(sentence, &t.term, self.gateway, &self.templates.classify)
                    .map_err(fail("classify"))?;
            let mut mention = AspectMention {
                sentence_id: sentence_id.into(),
                term: t.term,
                sentiment,
                flagged: false,
                source: MentionSource::Llm,
                verbatim: t.verbatim,
                exchange_ids: out.exchange_ids.clone(),
            };
            if consistency_check(&mention, &scores, self.settings.consistency_threshold) == Consistency::Flag {
                let again = self.recheck(sentence, &mention.term, &scores, &out).map_err(fail("recheck"))?;
                mention.sentiment = sentiment_of(&again);
                mention.exchange_ids.extend(&again.exchange_ids);
                mention.flagged = consistency_check(&mention, &scores, self.settings.consistency_threshold)
                    == Consistency::Flag;
            }
            exchange_ids.extend(&mention.exchange_ids);
            mentions.push(mention);
        }
        let (recommendations, rec_out) =
            mine_recommendations(sentence_id, sentence, self.gateway, &self.templates.recommend)
                .map_err(fail("recommend"))?;
        exchange_ids.extend(rec_out.exchange_ids);
        Ok(SentenceResult {
            sentence_id: sentence_id.into(),
            sentence: sentence.into(),
            mentions,
            recommendations,
            lexicon: scores,
            exchange_ids,
        })
    }

    fn recheck(
        &self,
        sentence: &str,
        term: &str,
        scores: &SentimentScores,
        first: &StructuredOutput,
    ) -> Result<StructuredOutput, CallError> {
        let t = &self.templates.classify;
        let messages = recheck_messages(t, sentence, term, scores, &first.response_text)?;
        self.gateway
            .converse_structured(&t.template_id, &t.output_schema, &t.decoding, messages, &|_| Ok(()))
    }

    pub fn run<'s>(
        &self,
        sentences: impl IntoIterator<Item = (&'s str, &'s str)>,
    ) -> Result<Vec<SentenceResult>, AspectError> {
        sentences
            .into_iter()
            .map(|(id, text)| self.run_sentence(id, text))
            .collect()
    }
}

/// The classification conversation extended with the first reply and the
/// lexicon hint.
pub fn recheck_messages(
    template: &PromptTemplate,
    sentence: &str,
    term: &str,
    scores: &SentimentScores,
    first_response: &str,
) -> Result<Vec<Message>, RenderError> {
    let mut messages = template.render(&vars([("sentence", sentence), ("aspect", term)]))?;
    messages.push(Message::assistant(first_response.to_string()));
    messages.push(Message::user(lexicon_hint(term, scores)));
    Ok(messages)
}

/// Expected pipeline output for one sentence, used to build stub fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKeyEntry {
    pub sentence_id: String,
    pub sentence: String,
    pub aspects: Vec<(String, Polarity)>,
    #[serde(default)]
    pub recommendations: Vec<String>,
}

/// Stub replies under which [`AspectPipeline`] reproduces `key` exactly.
/// A recheck, if the lexicon triggers one, repeats the keyed sentiment.
pub fn answer_key_fixtures(
    key: &[AnswerKeyEntry],
    templates: &AspectTemplates,
    lexicon: &Lexicon,
    settings: PipelineSettings,
) -> Result<FixtureTable, RenderError> {
    let mut table = FixtureTable::new();
    for e in key {
        let s = vars([("sentence", e.sentence.as_str())]);
        let terms: Vec<&str> = e.aspects.iter().map(|(t, _)| t.as_str()).collect();
        table.record(&templates.extract.render(&s)?, serde_json::json!({ "aspects": terms }).to_string());
        table.record(
            &templates.recommend.render(&s)?,
            serde_json::json!({ "recommendations": e.recommendations }).to_string(),
        );
        let scores = lexicon.polarity_scores(&e.sentence);
        for (term, sentiment) in &e.aspects {
            let term = normalize_term(term);
            let reply = serde_json::json!({ "sentiment": sentiment.as_str() }).to_string();
            let first = templates.classify.render(&vars([("sentence", e.sentence.as_str()), ("aspect", term.as_str())]))?;
            table.record(&first, reply.clone());
            let mention = AspectMention::gold(&e.sentence_id, &term, *sentiment);
            if consistency_check(&mention, &scores, settings.consistency_threshold) == Consistency::Flag {
                let again = recheck_messages(&templates.classify, &e.sentence, &term, &scores, &reply)?;
                table.record(&again, reply);
            }
        }
    }
    Ok(table)
}

pub fn all_mentions(results: &[SentenceResult]) -> Vec<AspectMention> {
    results.iter().flat_map(|r| r.mentions.iter().cloned()).collect()
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    sentence_id: &'a str,
    term: &'a str,
    sentiment: Polarity,
    flagged: bool,
    recommendations: Vec<&'a str>,
    verbatim: bool,
    exchange_ids: &'a [u64],
}

/// One JSON line per mention, carrying its sentence's recommendations.
pub fn write_predictions_jsonl(results: &[SentenceResult], mut w: impl Write) -> std::io::Result<()> {
    for r in results {
        let recs: Vec<&str> = r.recommendations.iter().map(|x| x.phrase.as_str()).collect();
        for m in &r.mentions {
            let row = PredictionRow {
                sentence_id: &r.sentence_id,
                term: &m.term,
                sentiment: m.sentiment,
                flagged: m.flagged,
                recommendations: recs.clone(),
                verbatim: m.verbatim,
                exchange_ids: &m.exchange_ids,
            };
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}
