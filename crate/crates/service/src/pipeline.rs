//! Batch orchestration. Each stage writes `<name>.<config hash>.<ext>` files
//! into the run directory; only data edges are enforced (the index before
//! topics and QA, aspect predictions and a gold file before evaluation).

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use reviewlens_core::aspects::{
    all_mentions, evaluate_extraction, evaluate_sentiment, load_gold, sentiment_distribution,
    write_predictions_jsonl, AspectError, AspectPipeline, AspectTemplates, EvalError, GoldAnnotation, GoldError,
    MatchPolicy, SentenceResult, SentimentDistribution, SentimentMode,
};
use reviewlens_core::corpus::{deduplicate, filter_english, load_reviews, CorpusError};
use reviewlens_core::llm::{
    AuditLog, ChatBackend, FixtureError, FixtureTable, Gateway, PromptTemplate, RemoteBackend, RenderError, StubBackend,
    TemplateError,
};
use reviewlens_core::ragqa::{
    answer, bundled_template, qa_proxy_metrics, write_annotation_sheet, write_answers_jsonl, write_metrics_csv,
    Answer, RagError,
};
use reviewlens_core::retrieval::{
    chunk_corpus, ChunkError, Embedder, HashedNgramEmbedder, IndexError, RemoteEmbedder, VectorIndex,
};
use reviewlens_core::sentiment::{corpus_discrepancy_summary, lexicon_label, DiscrepancyError, LexiconError};
use reviewlens_core::topics::{
    describe_topics, discover_topics, write_topic_table, PcaReducer, TopicError, TopicModel, TopicTemplates,
};
use reviewlens_core::{Lexicon, ReviewCorpus};

use crate::config::{AspectInput, BackendSection, Config, EmbeddingSection};
use crate::report::{
    export_tables, AspectSection, AuditRef, DiscrepancySection, EvalSection, IndexSection, IngestSection,
    QaSection, ReportBundle, TopicRow, TopicSection,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Discrepancy,
    Index,
    Aspects,
    Topics,
    Qa,
    Eval,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Discrepancy,
        Stage::Index,
        Stage::Aspects,
        Stage::Topics,
        Stage::Qa,
        Stage::Eval,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Discrepancy => "discrepancy",
            Stage::Index => "index",
            Stage::Aspects => "aspects",
            Stage::Topics => "topics",
            Stage::Qa => "qa",
            Stage::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.id() == s)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage} needs {needs}")]
    Prerequisite { stage: &'static str, needs: String },
    #[error("run directory {0} is locked by another run; remove the lockfile if that run is gone")]
    Locked(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Fixtures(#[from] FixtureError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Discrepancy(#[from] DiscrepancyError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Aspect(#[from] AspectError),
    #[error(transparent)]
    Gold(#[from] GoldError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Deterministic artifact names inside one run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub dir: PathBuf,
    pub hash: String,
}

impl RunDir {
    pub fn new(dir: &Path, config: &Config) -> Self {
        RunDir {
            dir: dir.to_path_buf(),
            hash: config.hash(),
        }
    }

    pub fn name(&self, stem: &str, ext: &str) -> String {
        format!("{stem}.{}.{ext}", self.hash)
    }

    pub fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(self.name(stem, ext))
    }

    pub fn index_paths(&self) -> (PathBuf, PathBuf) {
        (self.path("index", "bin"), self.path("chunks", "jsonl"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.path("report", "json")
    }
}

/// Exclusive hold on a run directory; released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<RunLock, PipelineError> {
        let path = dir.join(".reviewlens.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(dir.to_path_buf())),
            Err(e) => Err(PipelineError::Io { path, source: e }),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Everything built once from the config and shared by the stages.
pub struct Resources {
    pub lexicon: Lexicon,
    pub aspect_templates: AspectTemplates,
    pub topic_templates: TopicTemplates,
    pub rag_template: PromptTemplate,
    pub embedder: Arc<dyn Embedder>,
    pub backend: Arc<dyn ChatBackend>,
}

fn template(config: &Config, path: &Option<PathBuf>, bundled: PromptTemplate) -> Result<PromptTemplate, TemplateError> {
    match path {
        Some(p) => PromptTemplate::load(&config.resolve(p)),
        None => Ok(bundled),
    }
}

impl Resources {
    pub fn from_config(config: &Config) -> Result<Resources, PipelineError> {
        let backend: Arc<dyn ChatBackend> = match &config.backend {
            BackendSection::Stub { fixtures } => {
                Arc::new(StubBackend::new(FixtureTable::load(&config.resolve(fixtures))?))
            }
            BackendSection::Remote(r) => Arc::new(RemoteBackend::new(r.clone())),
        };
        Self::with_backend(config, backend)
    }

    /// Resources answering chat calls from `backend` instead of the
    /// configured one.
    pub fn with_backend(config: &Config, backend: Arc<dyn ChatBackend>) -> Result<Resources, PipelineError> {
        let mut lexicon = match &config.lexicon.path {
            Some(p) => Lexicon::load(&config.resolve(p))?,
            None => Lexicon::bundled(),
        };
        if let Some(p) = &config.lexicon.emoji {
            lexicon = lexicon.load_emoji_table(&config.resolve(p))?;
        }
        let t = &config.templates;
        let bundled_aspects = AspectTemplates::bundled();
        let bundled_topics = TopicTemplates::bundled();
        let aspect_templates = AspectTemplates {
            extract: template(config, &t.aspect_extract, bundled_aspects.extract)?,
            classify: template(config, &t.aspect_sentiment, bundled_aspects.classify)?,
            recommend: template(config, &t.recommend, bundled_aspects.recommend)?,
        };
        let topic_templates = TopicTemplates {
            label: template(config, &t.topic_label, bundled_topics.label)?,
            summary: template(config, &t.topic_summary, bundled_topics.summary)?,
        };
        let rag_template = template(config, &t.rag_answer, bundled_template())?;
        let embedder: Arc<dyn Embedder> = match &config.embedding {
            EmbeddingSection::Hashed { dim } => Arc::new(HashedNgramEmbedder::with_dim(*dim)),
            EmbeddingSection::Remote(r) => Arc::new(RemoteEmbedder::new(r.clone())),
        };
        Ok(Resources {
            lexicon,
            aspect_templates,
            topic_templates,
            rag_template,
            embedder,
            backend,
        })
    }

    pub fn template_ids(&self) -> BTreeMap<String, String> {
        [
            ("aspect_extract", &self.aspect_templates.extract),
            ("aspect_sentiment", &self.aspect_templates.classify),
            ("recommend", &self.aspect_templates.recommend),
            ("topic_label", &self.topic_templates.label),
            ("topic_summary", &self.topic_templates.summary),
            ("rag_answer", &self.rag_template),
        ]
        .into_iter()
        .map(|(k, t)| (k.to_string(), t.template_id.clone()))
        .collect()
    }

    /// A gateway with a fresh audit log.
    pub fn gateway(&self, config: &Config) -> Gateway {
        Gateway::from_arc(self.backend.clone(), config.gateway.clone()).with_audit(Arc::new(AuditLog::new()))
    }
}

pub struct Ingested {
    pub corpus: ReviewCorpus,
    pub section: IngestSection,
}

/// Load the configured corpus and apply the configured filters.
pub fn ingest(config: &Config) -> Result<Ingested, PipelineError> {
    let report = load_reviews(&config.resolve(&config.corpus.path), &config.corpus.schema())?;
    ingest_loaded(config, report.corpus, report.rejected.len())
}

pub fn ingest_loaded(config: &Config, corpus: ReviewCorpus, rejected_rows: usize) -> Result<Ingested, PipelineError> {
    let mut corpus = corpus;
    let (mut duplicates_removed, mut non_english_removed) = (0, 0);
    if config.corpus.deduplicate {
        let out = deduplicate(&corpus);
        duplicates_removed = out.removed;
        corpus = out.corpus;
    }
    if config.corpus.english_only {
        let out = filter_english(&corpus);
        non_english_removed = out.removed;
        corpus = out.corpus;
    }
    let section = IngestSection {
        reviews: corpus.len(),
        rejected_rows,
        duplicates_removed,
        non_english_removed,
    };
    Ok(Ingested { corpus, section })
}

/// `(sentence_id, sentence)` pairs for the aspect stage.
pub fn aspect_sentences(config: &Config, corpus: &dyn Fn() -> Result<ReviewCorpus, PipelineError>) -> Result<Vec<(String, String)>, PipelineError> {
    let mut sentences: Vec<(String, String)> = match config.aspects.input {
        AspectInput::Gold => gold(config, "aspects")?
            .into_iter()
            .map(|g| (g.sentence_id, g.sentence))
            .collect(),
        AspectInput::Corpus => corpus()?
            .reviews()
            .iter()
            .map(|r| (r.review_id.clone(), r.text.clone()))
            .collect(),
    };
    if let Some(limit) = config.aspects.limit {
        sentences.truncate(limit);
    }
    Ok(sentences)
}

fn gold(config: &Config, stage: &'static str) -> Result<Vec<GoldAnnotation>, PipelineError> {
    let path = config.aspects.gold.as_ref().ok_or(PipelineError::Prerequisite {
        stage,
        needs: "a gold file (aspects.gold)".into(),
    })?;
    Ok(load_gold(&config.resolve(path))?)
}

pub fn read_queries(path: &Path) -> Result<Vec<String>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn load_index(run: &RunDir) -> Result<Option<VectorIndex>, PipelineError> {
    let (v, c) = run.index_paths();
    if !(v.exists() && c.exists()) {
        return Ok(None);
    }
    Ok(Some(VectorIndex::load(&v, &c)?))
}

pub fn load_aspect_results(run: &RunDir) -> Result<Option<Vec<SentenceResult>>, PipelineError> {
    let p = run.path("aspects", "json");
    if !p.exists() {
        return Ok(None);
    }
    read_json(&p).map(Some)
}

pub fn load_topic_model(run: &RunDir) -> Result<Option<TopicModel>, PipelineError> {
    let p = run.path("topics", "json");
    if !p.exists() {
        return Ok(None);
    }
    read_json(&p).map(Some)
}

pub fn load_report(run: &RunDir) -> Result<Option<ReportBundle>, PipelineError> {
    let p = run.report_path();
    if !p.exists() {
        return Ok(None);
    }
    read_json(&p).map(Some)
}

fn distributions(results: &[SentenceResult]) -> (Option<SentimentDistribution>, Option<SentimentDistribution>) {
    let mentions = all_mentions(results);
    let llm = sentiment_distribution(&mentions).ok();
    let lexicon = SentimentDistribution::from_labels(
        results
            .iter()
            .flat_map(|r| r.mentions.iter().map(|_| lexicon_label(r.lexicon.compound))),
    )
    .ok();
    (llm, lexicon)
}

pub fn aspect_section(results: &[SentenceResult]) -> AspectSection {
    let (llm_distribution, lexicon_distribution) = distributions(results);
    AspectSection {
        sentences: results.len(),
        mentions: results.iter().map(|r| r.mentions.len()).sum(),
        flagged: results.iter().flat_map(|r| &r.mentions).filter(|m| m.flagged).count(),
        recommendations: results.iter().map(|r| r.recommendations.len()).sum(),
        llm_distribution,
        lexicon_distribution,
    }
}

pub fn topic_section(model: &TopicModel) -> TopicSection {
    let mut topics: Vec<TopicRow> = model.topics.iter().map(TopicRow::from).collect();
    topics.sort_by(|a, b| b.count.cmp(&a.count).then(a.topic_id.cmp(&b.topic_id)));
    TopicSection {
        topics,
        noise: model.noise,
        silhouette: model.silhouette,
    }
}

struct Run<'a> {
    config: &'a Config,
    res: &'a Resources,
    dir: RunDir,
    bundle: ReportBundle,
    corpus: Option<ReviewCorpus>,
    index: Option<VectorIndex>,
    aspects: Option<Vec<SentenceResult>>,
}

impl Run<'_> {
    fn artifact(&mut self, stem: &str, ext: &str) -> PathBuf {
        self.bundle.artifacts.push(self.dir.name(stem, ext));
        self.dir.path(stem, ext)
    }

    fn corpus(&mut self) -> Result<ReviewCorpus, PipelineError> {
        if self.corpus.is_none() {
            let ingested = ingest(self.config)?;
            self.corpus = Some(ingested.corpus);
        }
        Ok(self.corpus.clone().expect("loaded"))
    }

    fn index(&mut self, stage: &'static str) -> Result<VectorIndex, PipelineError> {
        if self.index.is_none() {
            self.index = load_index(&self.dir)?;
        }
        self.index.clone().ok_or(PipelineError::Prerequisite {
            stage,
            needs: format!("the index stage output ({})", self.dir.name("index", "bin")),
        })
    }

    fn save_audit(&mut self, stage: Stage, gateway: &Gateway) -> Result<(), PipelineError> {
        let path = self.artifact(&format!("audit-{}", stage.id()), "jsonl");
        let mut w = create(&path)?;
        gateway.audit().write_jsonl(&mut w).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
        self.bundle.audit.push(AuditRef {
            stage,
            file: self.dir.name(&format!("audit-{}", stage.id()), "jsonl"),
            exchanges: gateway.audit().len(),
        });
        Ok(())
    }

    fn stage(&mut self, stage: Stage) -> Result<(), PipelineError> {
        info!("stage {}", stage.id());
        match stage {
            Stage::Ingest => {
                let ingested = ingest(self.config)?;
                let path = self.artifact("corpus", "jsonl");
                let mut w = create(&path)?;
                ingested.corpus.write_jsonl(&mut w).map_err(io_err(&path))?;
                w.flush().map_err(io_err(&path))?;
                self.bundle.ingest = Some(ingested.section);
                self.corpus = Some(ingested.corpus);
            }
            Stage::Discrepancy => {
                let corpus = self.corpus()?;
                let summary = corpus_discrepancy_summary(&corpus, &self.res.lexicon)?;
                let path = self.artifact("discrepancy", "jsonl");
                let mut w = create(&path)?;
                summary.write_jsonl(&mut w).map_err(io_err(&path))?;
                w.flush().map_err(io_err(&path))?;
                self.bundle.discrepancy = Some(DiscrepancySection::from(&summary));
            }
            Stage::Index => {
                let corpus = self.corpus()?;
                let chunks = chunk_corpus(&corpus, self.config.chunking)?;
                let index = VectorIndex::build(chunks, self.res.embedder.as_ref())?;
                let (v, c) = self.dir.index_paths();
                self.artifact("index", "bin");
                self.artifact("chunks", "jsonl");
                index.save(&v, &c)?;
                self.bundle.index = Some(IndexSection {
                    chunks: index.len(),
                    dim: index.dim(),
                    embedder_id: index.embedder_id().to_string(),
                });
                self.index = Some(index);
            }
            Stage::Aspects => {
                let config = self.config;
                let corpus = self.corpus()?;
                let sentences = aspect_sentences(config, &|| Ok(corpus.clone()))?;
                let gateway = self.res.gateway(config);
                let pipeline = AspectPipeline {
                    gateway: &gateway,
                    templates: &self.res.aspect_templates,
                    lexicon: &self.res.lexicon,
                    settings: config.pipeline_settings(),
                };
                let results = pipeline.run(sentences.iter().map(|(id, s)| (id.as_str(), s.as_str())))?;
                self.save_audit(Stage::Aspects, &gateway)?;
                let json = self.artifact("aspects", "json");
                write_json(&json, &results)?;
                let path = self.artifact("predictions", "jsonl");
                let mut w = create(&path)?;
                write_predictions_jsonl(&results, &mut w).map_err(io_err(&path))?;
                w.flush().map_err(io_err(&path))?;
                self.bundle.aspects = Some(aspect_section(&results));
                self.aspects = Some(results);
            }
            Stage::Topics => {
                let index = self.index("topics")?;
                let mut model = discover_topics(&index, &PcaReducer, self.config.topics)?;
                let gateway = self.res.gateway(self.config);
                describe_topics(&mut model, &index, &gateway, &self.res.topic_templates)?;
                self.save_audit(Stage::Topics, &gateway)?;
                let json = self.artifact("topics", "json");
                write_json(&json, &model)?;
                let csv = self.artifact("topics", "csv");
                write_topic_table(&model.topics, create(&csv)?)?;
                self.bundle.topics = Some(topic_section(&model));
            }
            Stage::Qa => {
                let index = self.index("qa")?;
                let path = self.config.qa.queries.as_ref().ok_or(PipelineError::Prerequisite {
                    stage: "qa",
                    needs: "a query file (qa.queries)".into(),
                })?;
                let queries = read_queries(&self.config.resolve(path))?;
                let gateway = self.res.gateway(self.config);
                let settings = self.config.qa_settings();
                let answers: Vec<Answer> = queries
                    .iter()
                    .map(|q| answer(q, &index, self.res.embedder.as_ref(), &gateway, &self.res.rag_template, settings))
                    .collect::<Result<_, _>>()?;
                self.save_audit(Stage::Qa, &gateway)?;
                let refs: Vec<&str> = queries.iter().map(String::as_str).collect();
                let metrics = if refs.is_empty() {
                    Vec::new()
                } else {
                    qa_proxy_metrics(&refs, &index, self.res.embedder.as_ref(), settings.k)?
                };
                let p = self.artifact("answers", "jsonl");
                let mut w = create(&p)?;
                write_answers_jsonl(&answers, &mut w)?;
                w.flush().map_err(io_err(&p))?;
                let p = self.artifact("qa-metrics", "csv");
                write_metrics_csv(&metrics, create(&p)?)?;
                if !answers.is_empty() {
                    let p = self.artifact("annotation", "csv");
                    write_annotation_sheet(&answers, &index, create(&p)?)?;
                }
                self.bundle.qa = Some(QaSection {
                    k: settings.k,
                    floor: settings.floor,
                    metrics,
                    answers: answers.len(),
                    grounded: answers.iter().filter(|a| a.grounded).count(),
                });
            }
            Stage::Eval => {
                let gold = gold(self.config, "eval")?;
                if self.aspects.is_none() {
                    self.aspects = load_aspect_results(&self.dir)?;
                }
                let results = self.aspects.clone().ok_or(PipelineError::Prerequisite {
                    stage: "eval",
                    needs: format!("the aspects stage output ({})", self.dir.name("aspects", "json")),
                })?;
                let predicted = all_mentions(&results);
                let policy = self.config.eval.match_policy;
                let extraction = [MatchPolicy::Exact, MatchPolicy::TokenOverlap]
                    .into_iter()
                    .map(|p| evaluate_extraction(&predicted, &gold, p))
                    .collect::<Result<Vec<_>, _>>()?;
                let sentiment = [SentimentMode::MatchedOnly, SentimentMode::AllGold]
                    .into_iter()
                    .map(|m| evaluate_sentiment(&predicted, &gold, policy, m))
                    .collect::<Result<Vec<_>, _>>()?;
                let section = EvalSection {
                    policy,
                    mode: self.config.eval.sentiment_mode,
                    extraction,
                    sentiment,
                };
                let path = self.artifact("eval", "json");
                write_json(&path, &section)?;
                if self.bundle.aspects.is_none() {
                    self.bundle.aspects = Some(aspect_section(&results));
                }
                self.bundle.evaluation = Some(section);
            }
        }
        Ok(())
    }
}

/// Run `stages` (in canonical order) and write the bundle, its tables and
/// every stage artifact into `out`.
pub fn run_pipeline(config: &Config, out: &Path, stages: &[Stage]) -> Result<ReportBundle, PipelineError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let _lock = RunLock::acquire(out)?;
    let res = Resources::from_config(config)?;
    run_with(config, &res, out, stages)
}

/// As [`run_pipeline`], with prebuilt resources; the caller holds the lock.
pub fn run_with(config: &Config, res: &Resources, out: &Path, stages: &[Stage]) -> Result<ReportBundle, PipelineError> {
    let mut wanted: Vec<Stage> = stages.to_vec();
    wanted.sort();
    wanted.dedup();
    let dir = RunDir::new(out, config);
    let bundle = ReportBundle {
        config_hash: dir.hash.clone(),
        config: config.clone(),
        template_ids: res.template_ids(),
        stages: wanted.clone(),
        ingest: None,
        discrepancy: None,
        index: None,
        aspects: None,
        evaluation: None,
        topics: None,
        qa: None,
        audit: Vec::new(),
        artifacts: Vec::new(),
    };
    let mut run = Run {
        config,
        res,
        dir,
        bundle,
        corpus: None,
        index: None,
        aspects: None,
    };
    for stage in wanted {
        run.stage(stage)?;
    }
    let tables = export_tables(&run.bundle, &run.dir.dir)?;
    for t in &tables {
        let name = t.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        run.bundle.artifacts.push(name);
    }
    run.bundle.artifacts.sort();
    let report = run.dir.report_path();
    write_json(&report, &run.bundle)?;
    Ok(run.bundle)
}
