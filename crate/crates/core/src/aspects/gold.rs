use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::normalize_term;
use crate::sentiment::Polarity;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAspect {
    pub term: String,
    pub category: String,
    pub sentiment: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub sentence_id: String,
    pub sentence: String,
    pub aspects: Vec<GoldAspect>,
}

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("gold file: {0}")]
    Io(#[from] std::io::Error),
    #[error("gold CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("gold CSV is missing column {0}")]
    MissingColumn(&'static str),
    #[error("gold row {row}: {reason}")]
    Row { row: usize, reason: String },
}

const COLUMNS: [&str; 5] = ["sentence_id", "sentence", "aspect_term", "aspect_category", "sentiment"];

/// Parse gold annotations: one row per aspect, with columns
/// `sentence_id, sentence, aspect_term, aspect_category, sentiment`.
/// A row with an empty `aspect_term` records a sentence without aspects.
/// Sentences keep the order of their first row.
pub fn parse_gold(bytes: &[u8]) -> Result<Vec<GoldAnnotation>, GoldError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or(GoldError::MissingColumn(name))?;
    }
    let mut out: Vec<GoldAnnotation> = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let row = n + 2;
        let record = record?;
        let field = |i: usize| record.get(idx[i]).unwrap_or("").trim();
        let bad = |reason: String| GoldError::Row { row, reason };
        let sentence_id = field(0);
        if sentence_id.is_empty() {
            return Err(bad("empty sentence_id".into()));
        }
        let pos = match out.iter().position(|g| g.sentence_id == sentence_id) {
            Some(p) => p,
            None => {
                out.push(GoldAnnotation {
                    sentence_id: sentence_id.into(),
                    sentence: field(1).into(),
                    aspects: Vec::new(),
                });
                out.len() - 1
            }
        };
        let term = normalize_term(field(2));
        if term.is_empty() {
            continue;
        }
        let sentiment = Polarity::parse(field(4))
            .ok_or_else(|| bad(format!("sentiment {:?} is not positive, negative or neutral", field(4))))?;
        out[pos].aspects.push(GoldAspect {
            term,
            category: field(3).into(),
            sentiment,
        });
    }
    Ok(out)
}

pub fn load_gold(path: &Path) -> Result<Vec<GoldAnnotation>, GoldError> {
    parse_gold(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_rows_by_sentence() {
        let csv = "sentence_id,sentence,aspect_term,aspect_category,sentiment\n\
                   s1,Sync is Slow,Sync,performance,Negative\n\
                   s2,thanks,,,\n\
                   s1,Sync is Slow, UI ,design,neutral\n";
        let gold = parse_gold(csv.as_bytes()).unwrap();
        assert_eq!(gold.len(), 2);
        assert_eq!(gold[0].aspects.len(), 2);
        assert_eq!(gold[0].aspects[0].term, "sync");
        assert_eq!(gold[0].aspects[1].term, "ui");
        assert_eq!(gold[0].aspects[0].sentiment, Polarity::Negative);
        assert!(gold[1].aspects.is_empty());
    }

    #[test]
    fn reports_bad_input() {
        assert!(matches!(
            parse_gold(b"sentence_id,sentence\n"),
            Err(GoldError::MissingColumn("aspect_term"))
        ));
        let csv = "sentence_id,sentence,aspect_term,aspect_category,sentiment\ns1,x,ui,d,great\n";
        assert!(matches!(parse_gold(csv.as_bytes()), Err(GoldError::Row { row: 2, .. })));
    }
}
