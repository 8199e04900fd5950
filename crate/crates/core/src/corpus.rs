//! Review ingestion: loading, cleaning, deduplication and language filtering.
//!
//! Every operation here is a pure `ReviewCorpus -> ReviewCorpus` transform.
//! The original review text is never modified; matching and deduplication run
//! against [`Review::normalized_text`].

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::text::{is_stopword, normalize_whitespace_lower};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema maps no {role} column")]
    EmptyMapping { role: &'static str },
    #[error("input has no column named {column:?} (mapped as {role})")]
    MissingColumn { role: &'static str, column: String },
    #[error("zero parseable rows ({rejected} rejected)")]
    ZeroRows { rejected: usize },
    #[error("invalid review: {0}")]
    InvalidReview(String),
    #[error("duplicate review_id {0:?}")]
    DuplicateId(String),
}

/// One user review with its star rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub text: String,
    pub rating: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(skip)]
    pub normalized_text: String,
}

impl Review {
    pub fn new(
        review_id: impl Into<String>,
        text: impl Into<String>,
        rating: u8,
    ) -> Result<Self, CorpusError> {
        let review_id = review_id.into();
        let text = text.into();
        if review_id.trim().is_empty() {
            return Err(CorpusError::InvalidReview("empty review_id".into()));
        }
        if text.trim().is_empty() {
            return Err(CorpusError::InvalidReview(format!(
                "review {review_id:?} has empty text"
            )));
        }
        if !(1..=5).contains(&rating) {
            return Err(CorpusError::InvalidReview(format!(
                "review {review_id:?} has rating {rating} outside 1..=5"
            )));
        }
        let normalized_text = normalize_whitespace_lower(&text);
        Ok(Review {
            review_id,
            text,
            rating,
            app_id: None,
            timestamp: None,
            normalized_text,
        })
    }

    pub fn with_app_id(mut self, app_id: Option<String>) -> Self {
        self.app_id = app_id;
        self
    }

    pub fn with_timestamp(mut self, timestamp: Option<String>) -> Self {
        self.timestamp = timestamp;
        self
    }
}

/// Column-name mapping from an input file onto [`Review`] fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaMapping {
    pub text: String,
    pub rating: String,
    #[serde(default)]
    pub review_id: Option<String>,
    #[serde(default)]
    pub app_id: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
}

impl SchemaMapping {
    pub fn new(text: &str, rating: &str) -> Self {
        SchemaMapping {
            text: text.to_string(),
            rating: rating.to_string(),
            review_id: None,
            app_id: None,
            timestamp: None,
        }
    }

    /// Mapping for the canonical line-delimited export.
    pub fn canonical() -> Self {
        SchemaMapping {
            text: "text".into(),
            rating: "rating".into(),
            review_id: Some("review_id".into()),
            app_id: Some("app_id".into()),
            timestamp: Some("timestamp".into()),
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.text.trim().is_empty() {
            return Err(CorpusError::EmptyMapping { role: "text" });
        }
        if self.rating.trim().is_empty() {
            return Err(CorpusError::EmptyMapping { role: "rating" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    JsonLines,
}

impl InputFormat {
    /// `.csv` / `.tsv`-less CSV by extension; everything else is treated as
    /// line-delimited JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::JsonLines,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub schema: Option<SchemaMapping>,
    /// Preprocessing steps applied, in order (e.g. `"deduplicate"`).
    pub steps: Vec<String>,
}

/// An ordered, id-unique collection of reviews. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewCorpus {
    reviews: Vec<Review>,
    provenance: Provenance,
}

impl ReviewCorpus {
    pub fn new(reviews: Vec<Review>, provenance: Provenance) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(reviews.len());
        for r in &reviews {
            if !seen.insert(r.review_id.as_str()) {
                return Err(CorpusError::DuplicateId(r.review_id.clone()));
            }
        }
        Ok(ReviewCorpus {
            reviews,
            provenance,
        })
    }

    pub fn from_reviews(reviews: Vec<Review>) -> Result<Self, CorpusError> {
        Self::new(reviews, Provenance::default())
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn get(&self, review_id: &str) -> Option<&Review> {
        self.reviews.iter().find(|r| r.review_id == review_id)
    }

    fn retain_where(&self, step: &str, keep: impl FnMut(&Review) -> bool) -> FilterOutcome {
        let mut keep = keep;
        let reviews: Vec<Review> = self.reviews.iter().filter(|r| keep(r)).cloned().collect();
        let removed = self.reviews.len() - reviews.len();
        let mut provenance = self.provenance.clone();
        provenance.steps.push(step.to_string());
        FilterOutcome {
            corpus: ReviewCorpus {
                reviews,
                provenance,
            },
            removed,
        }
    }

    /// Canonical export: one `{review_id, text, rating, app_id, timestamp}`
    /// record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.reviews {
            let rec = serde_json::json!({
                "review_id": r.review_id,
                "text": r.text,
                "rating": r.rating,
                "app_id": r.app_id,
                "timestamp": r.timestamp,
            });
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// 1-based data row (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub corpus: ReviewCorpus,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub corpus: ReviewCorpus,
    pub removed: usize,
}

pub fn load_reviews(path: &Path, schema: &SchemaMapping) -> Result<LoadReport, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut report = parse_reviews(&bytes, InputFormat::from_path(path), schema)?;
    report.corpus.provenance.source = Some(path.to_path_buf());
    Ok(report)
}

/// Parse reviews from an in-memory buffer. Rows that fail to parse are
/// reported in [`LoadReport::rejected`] rather than aborting the load.
pub fn parse_reviews(
    bytes: &[u8],
    format: InputFormat,
    schema: &SchemaMapping,
) -> Result<LoadReport, CorpusError> {
    schema.validate()?;
    let rows = match format {
        InputFormat::Csv => csv_rows(bytes, schema)?,
        InputFormat::JsonLines => jsonl_rows(bytes, schema)?,
    };

    let mut reviews = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for (row, fields) in rows {
        match fields.and_then(|f| f.into_review(row)) {
            Ok(review) => {
                if seen.insert(review.review_id.clone()) {
                    reviews.push(review);
                } else {
                    rejected.push(Rejection {
                        row,
                        reason: format!("duplicate review_id {:?}", review.review_id),
                    });
                }
            }
            Err(reason) => rejected.push(Rejection { row, reason }),
        }
    }
    if reviews.is_empty() {
        return Err(CorpusError::ZeroRows {
            rejected: rejected.len(),
        });
    }
    let provenance = Provenance {
        source: None,
        schema: Some(schema.clone()),
        steps: Vec::new(),
    };
    Ok(LoadReport {
        corpus: ReviewCorpus {
            reviews,
            provenance,
        },
        rejected,
    })
}

#[derive(Default)]
struct RawFields {
    text: Option<String>,
    rating: Option<String>,
    review_id: Option<String>,
    app_id: Option<String>,
    timestamp: Option<String>,
}

impl RawFields {
    fn into_review(self, row: usize) -> Result<Review, String> {
        let text = self.text.ok_or("missing text")?;
        if text.trim().is_empty() {
            return Err("empty text".into());
        }
        let rating = parse_rating(self.rating.as_deref().ok_or("missing rating")?)?;
        let review_id = match self.review_id {
            Some(id) if !id.trim().is_empty() => id,
            _ => format!("row-{row}"),
        };
        let non_empty = |s: Option<String>| s.filter(|v| !v.trim().is_empty());
        Review::new(review_id, text, rating)
            .map(|r| {
                r.with_app_id(non_empty(self.app_id))
                    .with_timestamp(non_empty(self.timestamp))
            })
            .map_err(|e| e.to_string())
    }
}

fn parse_rating(raw: &str) -> Result<u8, String> {
    let raw = raw.trim();
    let value: f64 = raw
        .parse()
        .map_err(|_| format!("rating {raw:?} is not a number"))?;
    if value.fract() != 0.0 || !(1.0..=5.0).contains(&value) {
        return Err(format!("rating {raw:?} outside 1..=5"));
    }
    Ok(value as u8)
}

type Row = (usize, Result<RawFields, String>);

fn csv_rows(bytes: &[u8], schema: &SchemaMapping) -> Result<Vec<Row>, CorpusError> {
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(CorpusError::ZeroRows { rejected: 0 });
    }
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::InvalidReview(format!("unreadable header: {e}")))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |role: &'static str, name: &str| {
        column(name).ok_or_else(|| CorpusError::MissingColumn {
            role,
            column: name.to_string(),
        })
    };
    let text_col = required("text", &schema.text)?;
    let rating_col = required("rating", &schema.rating)?;
    let optional = |role: &'static str, name: &Option<String>| -> Result<Option<usize>, CorpusError> {
        match name {
            Some(n) => required(role, n).map(Some),
            None => Ok(None),
        }
    };
    let id_col = optional("review_id", &schema.review_id)?;
    let app_col = optional("app_id", &schema.app_id)?;
    let ts_col = optional("timestamp", &schema.timestamp)?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let fields = record.map_err(|e| e.to_string()).map(|rec| {
            let get = |col: Option<usize>| col.and_then(|c| rec.get(c)).map(str::to_string);
            RawFields {
                text: get(Some(text_col)),
                rating: get(Some(rating_col)),
                review_id: get(id_col),
                app_id: get(app_col),
                timestamp: get(ts_col),
            }
        });
        rows.push((row, fields));
    }
    Ok(rows)
}

fn jsonl_rows(bytes: &[u8], schema: &SchemaMapping) -> Result<Vec<Row>, CorpusError> {
    let text = String::from_utf8_lossy(bytes);
    let mut rows = Vec::new();
    let mut saw_text = false;
    let mut saw_rating = false;
    for (row, line) in text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| (i + 1, l))
    {
        let fields = match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(map)) => {
                let get = |name: &str| map.get(name).and_then(scalar_string);
                saw_text |= map.contains_key(&schema.text);
                saw_rating |= map.contains_key(&schema.rating);
                Ok(RawFields {
                    text: get(&schema.text),
                    rating: get(&schema.rating),
                    review_id: schema.review_id.as_deref().and_then(get),
                    app_id: schema.app_id.as_deref().and_then(get),
                    timestamp: schema.timestamp.as_deref().and_then(get),
                })
            }
            Ok(_) => Err("record is not an object".to_string()),
            Err(e) => Err(format!("malformed record: {e}")),
        };
        rows.push((row, fields));
    }
    if rows.is_empty() {
        return Err(CorpusError::ZeroRows { rejected: 0 });
    }
    let parsed_any = rows.iter().any(|(_, f)| f.is_ok());
    if parsed_any && !saw_text {
        return Err(CorpusError::MissingColumn {
            role: "text",
            column: schema.text.clone(),
        });
    }
    if parsed_any && !saw_rating {
        return Err(CorpusError::MissingColumn {
            role: "rating",
            column: schema.rating.clone(),
        });
    }
    Ok(rows)
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Collapse reviews with identical normalized text to their first occurrence.
pub fn deduplicate(corpus: &ReviewCorpus) -> FilterOutcome {
    let mut seen = HashSet::new();
    corpus.retain_where("deduplicate", |r| seen.insert(r.normalized_text.clone()))
}

/// Drop reviews that fail [`is_probably_english`].
pub fn filter_english(corpus: &ReviewCorpus) -> FilterOutcome {
    corpus.retain_where("filter_english", |r| is_probably_english(&r.text))
}

/// Minimum share of ASCII letters among all alphabetic characters.
pub const LATIN_RATIO_MIN: f64 = 0.7;
/// Reviews shorter than this many tokens skip the stopword test.
pub const SHORT_REVIEW_TOKENS: usize = 3;

/// Retain iff at least 70% of alphabetic characters are ASCII letters and,
/// for reviews of three or more tokens, at least one token is an English
/// stopword. Text without any alphabetic characters passes the script test.
pub fn is_probably_english(text: &str) -> bool {
    let (alpha, ascii) = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .fold((0usize, 0usize), |(a, l), c| {
            (a + 1, l + usize::from(c.is_ascii_alphabetic()))
        });
    if alpha > 0 && (ascii as f64) < LATIN_RATIO_MIN * alpha as f64 {
        return false;
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() < SHORT_REVIEW_TOKENS {
        return true;
    }
    tokens.iter().any(|t| {
        let t = t
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        is_stopword(&t)
    })
}
