use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_LEXICON: &str = include_str!("../../data/vader_lexicon.txt");
const BUNDLED_EMOJI: &str = include_str!("../../data/emoji_utf8_lexicon.txt");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub token: String,
    pub mean_valence: f64,
    pub stddev: f64,
    pub raw_ratings: Option<Vec<i32>>,
}

/// Token valences plus the optional emoji description table.
///
/// Tokens are stored exactly as they appear in the file; lookups are done
/// with the lowercased token.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, LexiconEntry>,
    emoji: HashMap<char, String>,
    warnings: Vec<String>,
}

impl Lexicon {
    /// Parse the four-column TSV format:
    /// `token<TAB>mean<TAB>stddev<TAB>[r1, r2, ...]`.
    pub fn parse(text: &str) -> Result<Lexicon, LexiconError> {
        let mut lex = Lexicon::default();
        for (idx, raw) in text.split('\n').enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            let entry = parse_line(line).map_err(|reason| LexiconError::Malformed {
                line: line_no,
                reason,
            })?;
            if lex.entries.contains_key(&entry.token) {
                lex.warnings.push(format!(
                    "line {line_no}: duplicate token {:?}, last definition wins",
                    entry.token
                ));
            }
            lex.entries.insert(entry.token.clone(), entry);
        }
        if lex.entries.is_empty() {
            lex.warnings.push("lexicon is empty".into());
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        Self::parse(&read(path)?)
    }

    /// The published lexicon and emoji table shipped with the crate.
    pub fn bundled() -> Lexicon {
        Self::parse(BUNDLED_LEXICON)
            .expect("bundled lexicon parses")
            .with_emoji_table(BUNDLED_EMOJI)
            .expect("bundled emoji table parses")
    }

    /// Build a lexicon directly from `(token, valence)` pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Lexicon {
        let entries = pairs
            .into_iter()
            .map(|(t, v)| {
                (
                    t.to_string(),
                    LexiconEntry {
                        token: t.to_string(),
                        mean_valence: v,
                        stddev: 0.0,
                        raw_ratings: None,
                    },
                )
            })
            .collect();
        Lexicon {
            entries,
            ..Default::default()
        }
    }

    /// Attach an emoji table (`emoji<TAB>description` per line). Only
    /// single-character keys can match, since text is scanned per character.
    pub fn with_emoji_table(mut self, text: &str) -> Result<Lexicon, LexiconError> {
        for (idx, raw) in text.split('\n').enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(key), Some(desc)) = (parts.next(), parts.next()) else {
                return Err(LexiconError::Malformed {
                    line: idx + 1,
                    reason: "expected emoji<TAB>description".into(),
                });
            };
            let mut chars = key.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                self.emoji.insert(c, desc.trim().to_string());
            }
        }
        Ok(self)
    }

    pub fn load_emoji_table(self, path: &Path) -> Result<Lexicon, LexiconError> {
        let text = read(path)?;
        self.with_emoji_table(&text)
    }

    pub fn valence(&self, lowercase_token: &str) -> Option<f64> {
        self.entries.get(lowercase_token).map(|e| e.mean_valence)
    }

    pub fn contains(&self, lowercase_token: &str) -> bool {
        self.entries.contains_key(lowercase_token)
    }

    pub fn entry(&self, token: &str) -> Option<&LexiconEntry> {
        self.entries.get(token)
    }

    pub fn emoji_description(&self, c: char) -> Option<&str> {
        self.emoji.get(&c).map(String::as_str)
    }

    pub fn has_emoji_table(&self) -> bool {
        !self.emoji.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

fn read(path: &Path) -> Result<String, LexiconError> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_line(line: &str) -> Result<LexiconEntry, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    }
    let token = fields[0];
    if token.is_empty() {
        return Err("empty token".into());
    }
    let mean_valence: f64 = fields[1]
        .trim()
        .parse()
        .map_err(|_| format!("valence {:?} is not a number", fields[1]))?;
    if !(-4.0..=4.0).contains(&mean_valence) {
        return Err(format!("valence {mean_valence} outside [-4, 4]"));
    }
    let stddev: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| format!("stddev {:?} is not a number", fields[2]))?;
    if !(stddev >= 0.0 && stddev.is_finite()) {
        return Err(format!("stddev {stddev} must be finite and non-negative"));
    }
    let ratings = fields[3].trim();
    let raw_ratings = if ratings.is_empty() {
        None
    } else {
        Some(
            serde_json::from_str::<Vec<i32>>(ratings)
                .map_err(|_| format!("raw ratings {ratings:?} are not an integer list"))?,
        )
    };
    Ok(LexiconEntry {
        token: token.to_string(),
        mean_valence,
        stddev,
        raw_ratings,
    })
}
