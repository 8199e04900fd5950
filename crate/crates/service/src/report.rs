//! The report bundle and its CSV tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use reviewlens_core::aspects::{ExtractionReport, MatchPolicy, SentimentDistribution, SentimentMode, SentimentReport};
use reviewlens_core::ragqa::QaMetricsRow;
use reviewlens_core::sentiment::{DiscrepancySummary, HistogramBin, Polarity};
use reviewlens_core::topics::{SilhouetteScores, TopicCluster};

use crate::config::Config;
use crate::pipeline::Stage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSection {
    pub reviews: usize,
    pub rejected_rows: usize,
    pub duplicates_removed: usize,
    pub non_english_removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySection {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub over_rated: usize,
    pub under_rated: usize,
    pub histogram: Vec<HistogramBin>,
}

impl From<&DiscrepancySummary> for DiscrepancySection {
    fn from(s: &DiscrepancySummary) -> Self {
        DiscrepancySection {
            count: s.count,
            mean: s.mean,
            median: s.median,
            max: s.max,
            over_rated: s.over_rated,
            under_rated: s.under_rated,
            histogram: s.histogram.bins.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSection {
    pub chunks: usize,
    pub dim: usize,
    pub embedder_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectSection {
    pub sentences: usize,
    pub mentions: usize,
    pub flagged: usize,
    pub recommendations: usize,
    /// Labels predicted per aspect mention.
    pub llm_distribution: Option<SentimentDistribution>,
    /// The lexicon's label for each mention's sentence.
    pub lexicon_distribution: Option<SentimentDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    pub policy: MatchPolicy,
    pub mode: SentimentMode,
    /// One report per matching policy.
    pub extraction: Vec<ExtractionReport>,
    /// One report per sentiment mode, under `policy`.
    pub sentiment: Vec<SentimentReport>,
}

impl EvalSection {
    pub fn sentiment_for(&self, mode: SentimentMode) -> Option<&SentimentReport> {
        self.sentiment.iter().find(|r| r.mode == mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRow {
    pub topic_id: usize,
    pub count: usize,
    pub top_keywords: Vec<String>,
    pub label: String,
    pub summary: String,
}

impl From<&TopicCluster> for TopicRow {
    fn from(t: &TopicCluster) -> Self {
        TopicRow {
            topic_id: t.topic_id,
            count: t.count,
            top_keywords: t.keywords.iter().map(|k| k.term.clone()).collect(),
            label: t.label.clone(),
            summary: t.summary.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSection {
    /// Largest topic first.
    pub topics: Vec<TopicRow>,
    pub noise: usize,
    pub silhouette: SilhouetteScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaSection {
    pub k: usize,
    pub floor: f64,
    pub metrics: Vec<QaMetricsRow>,
    pub answers: usize,
    pub grounded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRef {
    pub stage: Stage,
    /// File name inside the run directory.
    pub file: String,
    pub exchanges: usize,
}

/// Everything one pipeline run produced. Paths are file names relative to
/// the run directory, so identical inputs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config_hash: String,
    pub config: Config,
    pub template_ids: BTreeMap<String, String>,
    pub stages: Vec<Stage>,
    pub ingest: Option<IngestSection>,
    pub discrepancy: Option<DiscrepancySection>,
    pub index: Option<IndexSection>,
    pub aspects: Option<AspectSection>,
    pub evaluation: Option<EvalSection>,
    pub topics: Option<TopicSection>,
    pub qa: Option<QaSection>,
    pub audit: Vec<AuditRef>,
    pub artifacts: Vec<String>,
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn title(p: Polarity) -> &'static str {
    match p {
        Polarity::Positive => "Positive",
        Polarity::Negative => "Negative",
        Polarity::Neutral => "Neutral",
    }
}

/// CSV tables as `(file stem, rows)`, header first. Missing sections give
/// header-only tables.
pub fn tables(bundle: &ReportBundle) -> Vec<(&'static str, Vec<Vec<String>>)> {
    let row = |cells: &[&str]| cells.iter().map(|s| s.to_string()).collect::<Vec<String>>();
    let mut out = Vec::new();

    let mut t = vec![row(&["Model", "Precision", "Recall", "F1-Score"])];
    if let Some(e) = &bundle.evaluation {
        let backend = match &bundle.config.backend {
            crate::config::BackendSection::Stub { .. } => "stub",
            crate::config::BackendSection::Remote(_) => "remote",
        };
        for r in &e.extraction {
            let name = format!("LLM {backend} ({})", r.policy.id());
            t.push(vec![name, f3(r.precision), f3(r.recall), f3(r.f1)]);
        }
    }
    out.push(("table-aspect-extraction", t));

    let mut t = vec![row(&["Model", "Positive", "Negative", "Neutral"])];
    if let Some(a) = &bundle.aspects {
        for (name, d) in [("LLM-based", &a.llm_distribution), ("VADER", &a.lexicon_distribution)] {
            if let Some(d) = d {
                t.push(vec![name.to_string(), pct(d.positive), pct(d.negative), pct(d.neutral)]);
            }
        }
    }
    out.push(("table-sentiment-distribution", t));

    let mut t = vec![row(&["Sentiment", "Precision", "Recall", "F1-Score"])];
    if let Some(r) = bundle.evaluation.as_ref().and_then(|e| e.sentiment_for(e.mode)) {
        for c in &r.classes {
            t.push(vec![title(c.class).to_string(), f3(c.precision), f3(c.recall), f3(c.f1)]);
        }
        let w = &r.weighted;
        t.push(vec!["Weighted Avg".into(), f3(w.precision), f3(w.recall), f3(w.f1)]);
    }
    out.push(("table-sentiment-metrics", t));

    let mut t = vec![row(&["Metric", "Reduced Space", "Embedding Space"])];
    if let Some(s) = &bundle.topics {
        let cell = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
        t.push(vec![
            "Silhouette Score".into(),
            cell(s.silhouette.reduced),
            cell(s.silhouette.full),
        ]);
    }
    out.push(("table-silhouette", t));

    let mut t = vec![row(&["Query", "Avg. Cosine Sim.", "Diversity"])];
    if let Some(q) = &bundle.qa {
        for m in &q.metrics {
            t.push(vec![m.query.clone(), f3(m.avg_cosine), format!("{:.1}", m.diversity)]);
        }
    }
    out.push(("table-retrieval-proxy", t));

    let mut t = vec![row(&["topic_id", "count", "top_keywords", "label", "summary"])];
    if let Some(s) = &bundle.topics {
        for r in &s.topics {
            t.push(vec![
                r.topic_id.to_string(),
                r.count.to_string(),
                r.top_keywords.join(";"),
                r.label.clone(),
                r.summary.clone(),
            ]);
        }
    }
    out.push(("table-topics", t));

    let mut t = vec![row(&["bin_lo", "bin_hi", "count"])];
    if let Some(d) = &bundle.discrepancy {
        for b in &d.histogram {
            t.push(vec![format!("{:.1}", b.lo), format!("{:.1}", b.hi), b.count.to_string()]);
        }
    }
    out.push(("table-discrepancy-histogram", t));
    out
}

/// Write every table as `<stem>.<hash>.csv` in `dir`; returns the paths.
pub fn export_tables(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>, csv::Error> {
    let mut paths = Vec::new();
    for (stem, rows) in tables(bundle) {
        let path = dir.join(format!("{stem}.{}.csv", bundle.config_hash));
        let mut w = csv::Writer::from_path(&path)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}
