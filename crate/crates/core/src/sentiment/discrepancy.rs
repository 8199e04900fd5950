use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{polarity_scores, Lexicon};
use crate::corpus::{Review, ReviewCorpus};

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.5;
const MAX_DISCREPANCY: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum DiscrepancyError {
    #[error("compound score {0} outside [-1, 1]")]
    Domain(f64),
    #[error("corpus is empty")]
    EmptyCorpus,
}

/// How a compound score is placed on the star scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarMode {
    /// `2c + 3`.
    #[default]
    Continuous,
    /// `2c + 3` rounded to the nearest whole star.
    Rounded,
}

pub fn to_star_scale(compound: f64, mode: StarMode) -> Result<f64, DiscrepancyError> {
    if !(-1.0..=1.0).contains(&compound) {
        return Err(DiscrepancyError::Domain(compound));
    }
    let s = 2.0 * compound + 3.0;
    Ok(match mode {
        StarMode::Continuous => s,
        StarMode::Rounded => s.round(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRecord {
    pub review_id: String,
    pub star_rating: u8,
    pub sentiment_rating: f64,
    pub discrepancy: f64,
}

impl DiscrepancyRecord {
    pub fn from_compound(review: &Review, compound: f64, mode: StarMode) -> Result<Self, DiscrepancyError> {
        let sentiment_rating = to_star_scale(compound, mode)?;
        Ok(DiscrepancyRecord {
            review_id: review.review_id.clone(),
            star_rating: review.rating,
            sentiment_rating,
            discrepancy: (f64::from(review.rating) - sentiment_rating).abs(),
        })
    }

    /// Star rating above the text-derived rating.
    pub fn over_rated(&self) -> bool {
        f64::from(self.star_rating) > self.sentiment_rating
    }
}

pub fn discrepancy(review: &Review, lexicon: &Lexicon) -> DiscrepancyRecord {
    let compound = polarity_scores(&review.text, lexicon).compound;
    DiscrepancyRecord::from_compound(review, compound, StarMode::Continuous)
        .expect("compound is clamped to [-1, 1]")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Fixed 0.5-wide bins over [0, 4]; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
}

impl Default for Histogram {
    fn default() -> Self {
        let n = (MAX_DISCREPANCY / HISTOGRAM_BIN_WIDTH) as usize;
        Histogram {
            bins: (0..n)
                .map(|i| HistogramBin {
                    lo: i as f64 * HISTOGRAM_BIN_WIDTH,
                    hi: (i + 1) as f64 * HISTOGRAM_BIN_WIDTH,
                    count: 0,
                })
                .collect(),
        }
    }
}

impl Histogram {
    pub fn add(&mut self, value: f64) {
        let last = self.bins.len() - 1;
        let idx = ((value / HISTOGRAM_BIN_WIDTH).floor().max(0.0) as usize).min(last);
        self.bins[idx].count += 1;
    }

    /// Bin-wise sum; histograms built from disjoint partitions merge to the
    /// histogram of the union.
    pub fn merge(mut self, other: &Histogram) -> Histogram {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.count += b.count;
        }
        self
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for b in &self.bins {
            w.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub histogram: Histogram,
    /// Reviews whose star rating exceeds the text-derived rating.
    pub over_rated: usize,
    pub under_rated: usize,
    pub records: Vec<DiscrepancyRecord>,
}

impl DiscrepancySummary {
    pub fn from_records(records: Vec<DiscrepancyRecord>) -> Result<Self, DiscrepancyError> {
        if records.is_empty() {
            return Err(DiscrepancyError::EmptyCorpus);
        }
        let histogram = records
            .par_chunks(1024)
            .map(|chunk| {
                let mut h = Histogram::default();
                chunk.iter().for_each(|r| h.add(r.discrepancy));
                h
            })
            .reduce(Histogram::default, |a, b| a.merge(&b));
        let count = records.len();
        let mean = records.iter().map(|r| r.discrepancy).sum::<f64>() / count as f64;
        let mut sorted: Vec<f64> = records.iter().map(|r| r.discrepancy).collect();
        sorted.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            sorted[count / 2]
        } else {
            (sorted[count / 2 - 1] + sorted[count / 2]) / 2.0
        };
        let over_rated = records.iter().filter(|r| r.over_rated()).count();
        let under_rated = records
            .iter()
            .filter(|r| f64::from(r.star_rating) < r.sentiment_rating)
            .count();
        Ok(DiscrepancySummary {
            count,
            mean,
            median,
            max: *sorted.last().expect("non-empty"),
            histogram,
            over_rated,
            under_rated,
            records,
        })
    }

    /// One `{review_id, star_rating, sentiment_rating, discrepancy}` line per
    /// review, then a final summary line tagged `"record": "summary"`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        let summary = serde_json::json!({
            "record": "summary",
            "count": self.count,
            "mean": self.mean,
            "median": self.median,
            "max": self.max,
            "over_rated": self.over_rated,
            "under_rated": self.under_rated,
            "histogram": self.histogram.bins,
        });
        serde_json::to_writer(&mut out, &summary)?;
        out.write_all(b"\n")
    }
}

/// Score every review in parallel and summarise the gaps.
pub fn corpus_discrepancy_summary(
    corpus: &ReviewCorpus,
    lexicon: &Lexicon,
) -> Result<DiscrepancySummary, DiscrepancyError> {
    let records: Vec<DiscrepancyRecord> = corpus
        .reviews()
        .par_iter()
        .map(|r| discrepancy(r, lexicon))
        .collect();
    DiscrepancySummary::from_records(records)
}
