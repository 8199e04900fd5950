//! Lexicon sentiment scoring and rating/text discrepancy analysis.

mod discrepancy;
mod lexicon;
mod vader;

pub use discrepancy::{
    corpus_discrepancy_summary, discrepancy, to_star_scale, DiscrepancyError, DiscrepancyRecord,
    DiscrepancySummary, Histogram, HistogramBin, StarMode, HISTOGRAM_BIN_WIDTH,
};
pub use lexicon::{Lexicon, LexiconEntry, LexiconError};
pub use vader::{
    normalize_score, polarity_scores, SentimentScores, BOOSTER_INCREMENT, BUT_AFTER_WEIGHT,
    BUT_BEFORE_WEIGHT, CAPS_INCREMENT, EXCLAMATION_INCREMENT, NEGATION_SCALAR,
    NORMALIZATION_ALPHA,
};

use serde::{Deserialize, Serialize};

/// Three-way polarity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Polarity> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(Polarity::Positive),
            "negative" => Some(Polarity::Negative),
            "neutral" => Some(Polarity::Neutral),
            _ => None,
        }
    }
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Compound cut-off for the positive/negative lexicon labels.
pub const LABEL_THRESHOLD: f64 = 0.05;

/// Label a compound score: `>= 0.05` positive, `<= -0.05` negative, else neutral.
pub fn lexicon_label(compound: f64) -> Polarity {
    if compound >= LABEL_THRESHOLD {
        Polarity::Positive
    } else if compound <= -LABEL_THRESHOLD {
        Polarity::Negative
    } else {
        Polarity::Neutral
    }
}

impl Lexicon {
    pub fn polarity_scores(&self, text: &str) -> SentimentScores {
        polarity_scores(text, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_cutoffs() {
        assert_eq!(lexicon_label(0.05), Polarity::Positive);
        assert_eq!(lexicon_label(0.0499), Polarity::Neutral);
        assert_eq!(lexicon_label(-0.05), Polarity::Negative);
    }

    #[test]
    fn polarity_parse_is_case_insensitive() {
        assert_eq!(Polarity::parse(" Positive"), Some(Polarity::Positive));
        assert_eq!(Polarity::parse("mixed"), None);
    }
}
