//! HTTP API over a run directory.
//!
//! Reads come from the artifacts of the last batch run for the configured
//! hash; `POST /ingest` replaces the corpus, discrepancy summary and index
//! in memory (topics stay those of the batch run). Errors are JSON
//! `{code, message}`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use reviewlens_core::aspects::SentenceResult;
use reviewlens_core::corpus::{parse_reviews, InputFormat, SchemaMapping};
use reviewlens_core::ragqa::{answer, Answer, QaSettings};
use reviewlens_core::retrieval::{chunk_corpus, Chunk, VectorIndex};
use reviewlens_core::sentiment::corpus_discrepancy_summary;

use crate::config::Config;
use crate::jobs::{JobRecord, JobStore};
use crate::pipeline::{
    ingest_loaded, load_aspect_results, load_index, load_report, load_topic_model, topic_section, PipelineError,
    Resources, RunDir,
};
use crate::report::{DiscrepancySection, ReportBundle, TopicRow};

const MAX_UPLOAD: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn not_ready(what: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "not_ready",
            format!("no {what} yet; run the batch pipeline or POST /ingest first"),
        )
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Data served by the read endpoints.
#[derive(Default)]
pub struct Loaded {
    pub index: Option<Arc<VectorIndex>>,
    pub discrepancy: Option<DiscrepancySection>,
    pub topics: Vec<TopicRow>,
    /// Member chunks per topic id, resolved against the batch index.
    pub topic_chunks: BTreeMap<usize, Vec<Chunk>>,
    pub aspects: BTreeMap<String, SentenceResult>,
    pub report: Option<ReportBundle>,
}

impl Loaded {
    /// Whatever the run directory already holds for this config.
    pub fn from_run(run: &RunDir) -> Result<Loaded, PipelineError> {
        let index = load_index(run)?;
        let report = load_report(run)?;
        let mut loaded = Loaded {
            discrepancy: report.as_ref().and_then(|r| r.discrepancy.clone()),
            report,
            ..Loaded::default()
        };
        if let Some(model) = load_topic_model(run)? {
            loaded.topics = topic_section(&model).topics;
            if let Some(index) = &index {
                for t in &model.topics {
                    let chunks = t.member_chunk_ids.iter().filter_map(|id| index.chunk(id).cloned()).collect();
                    loaded.topic_chunks.insert(t.topic_id, chunks);
                }
            }
        }
        if let Some(results) = load_aspect_results(run)? {
            loaded.aspects = results.into_iter().map(|r| (r.sentence_id.clone(), r)).collect();
        }
        loaded.index = index.map(Arc::new);
        Ok(loaded)
    }
}

pub struct AppState {
    pub config: Config,
    pub resources: Resources,
    pub run: RunDir,
    pub jobs: JobStore,
    pub data: RwLock<Loaded>,
}

impl AppState {
    pub fn open(config: Config, resources: Resources, out: &Path) -> Result<AppState, PipelineError> {
        let run = RunDir::new(out, &config);
        let data = Loaded::from_run(&run)?;
        Ok(AppState {
            config,
            resources,
            run,
            jobs: JobStore::new(),
            data: RwLock::new(data),
        })
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Loaded> {
        self.data.read().expect("state lock poisoned")
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ingest", post(ingest))
        .route("/discrepancy/summary", get(discrepancy_summary))
        .route("/topics", get(topics))
        .route("/topics/{id}/chunks", get(topic_chunks))
        .route("/chunks/{id}", get(chunk))
        .route("/qa", post(qa))
        .route("/aspects", get(aspects))
        .route("/jobs/{id}", get(job))
        .route("/reports/latest", get(latest_report))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
}

struct Upload {
    bytes: Vec<u8>,
    format: InputFormat,
    schema: SchemaMapping,
}

async fn read_upload(config: &Config, mut form: Multipart) -> Result<Upload, ApiError> {
    let mut file: Option<(Vec<u8>, InputFormat)> = None;
    let mut schema = None;
    let mut format = None;
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::bad_request(e.to_string()))? {
        match field.name().unwrap_or_default() {
            "file" => {
                let guess = InputFormat::from_path(Path::new(field.file_name().unwrap_or_default()));
                let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.to_string()))?;
                file = Some((bytes.to_vec(), guess));
            }
            "schema" => {
                let text = field.text().await.map_err(|e| ApiError::bad_request(e.to_string()))?;
                let parsed: SchemaMapping =
                    serde_json::from_str(&text).map_err(|e| ApiError::bad_request(format!("field `schema`: {e}")))?;
                schema = Some(parsed);
            }
            "format" => {
                let text = field.text().await.map_err(|e| ApiError::bad_request(e.to_string()))?;
                let parsed: InputFormat = serde_json::from_value(serde_json::Value::String(text.trim().to_string()))
                    .map_err(|_| ApiError::bad_request("field `format`: expected csv or jsonlines"))?;
                format = Some(parsed);
            }
            other => return Err(ApiError::bad_request(format!("unexpected form field `{other}`"))),
        }
    }
    let (bytes, guess) = file.ok_or_else(|| ApiError::bad_request("missing form field `file`"))?;
    Ok(Upload {
        bytes,
        format: format.unwrap_or(guess),
        schema: schema.unwrap_or_else(|| config.corpus.schema()),
    })
}

/// Parse, filter, score and index an uploaded corpus; returns artifact names.
fn run_ingest(state: &AppState, job: &JobRecord, upload: Upload) -> Result<Vec<String>, String> {
    let report = parse_reviews(&upload.bytes, upload.format, &upload.schema).map_err(|e| e.to_string())?;
    state.jobs.progress(&job.job_id, 0.2);
    let ingested = ingest_loaded(&state.config, report.corpus, report.rejected.len()).map_err(|e| e.to_string())?;
    let summary = corpus_discrepancy_summary(&ingested.corpus, &state.resources.lexicon).map_err(|e| e.to_string())?;
    state.jobs.progress(&job.job_id, 0.4);
    let chunks = chunk_corpus(&ingested.corpus, state.config.chunking).map_err(|e| e.to_string())?;
    let index = VectorIndex::build(chunks, state.resources.embedder.as_ref()).map_err(|e| e.to_string())?;
    state.jobs.progress(&job.job_id, 0.8);

    let dir: PathBuf = state.run.dir.join("jobs").join(&job.job_id);
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<String, String> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| e.to_string())?;
        std::fs::write(dir.join(name), buf).map_err(|e| e.to_string())?;
        Ok(format!("jobs/{}/{name}", job.job_id))
    };
    let mut artifacts = vec![
        write("corpus.jsonl", &|b| ingested.corpus.write_jsonl(b))?,
        write("discrepancy.jsonl", &|b| summary.write_jsonl(b))?,
    ];
    index
        .save(&dir.join("index.bin"), &dir.join("chunks.jsonl"))
        .map_err(|e| e.to_string())?;
    artifacts.push(format!("jobs/{}/index.bin", job.job_id));
    artifacts.push(format!("jobs/{}/chunks.jsonl", job.job_id));

    let mut data = state.data.write().expect("state lock poisoned");
    data.discrepancy = Some(DiscrepancySection::from(&summary));
    data.index = Some(Arc::new(index));
    Ok(artifacts)
}

async fn ingest(State(state): State<Arc<AppState>>, form: Multipart) -> Result<(StatusCode, Json<JobAccepted>), ApiError> {
    let upload = read_upload(&state.config, form).await?;
    let job = state.jobs.create("ingest");
    let job_id = job.job_id.clone();
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        worker.jobs.start(&job.job_id);
        match run_ingest(&worker, &job, upload) {
            Ok(artifacts) => worker.jobs.finish(&job.job_id, artifacts),
            Err(e) => worker.jobs.fail(&job.job_id, e),
        };
    });
    Ok((StatusCode::ACCEPTED, Json(JobAccepted { job_id })))
}

async fn job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<JobRecord> {
    state
        .jobs
        .get(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no job {id}")))
}

async fn discrepancy_summary(State(state): State<Arc<AppState>>) -> ApiResult<DiscrepancySection> {
    state.read().discrepancy.clone().map(Json).ok_or_else(|| ApiError::not_ready("discrepancy summary"))
}

async fn topics(State(state): State<Arc<AppState>>) -> ApiResult<Vec<TopicRow>> {
    Ok(Json(state.read().topics.clone()))
}

async fn topic_chunks(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Vec<Chunk>> {
    let id: usize = id.parse().map_err(|_| ApiError::bad_request(format!("topic id {id:?} is not a number")))?;
    state
        .read()
        .topic_chunks
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no topic {id}")))
}

async fn chunk(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Chunk> {
    let data = state.read();
    let index = data.index.as_ref().ok_or_else(|| ApiError::not_ready("index"))?;
    index
        .chunk(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no chunk {id}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QaRequest {
    pub query: String,
    pub k: Option<usize>,
}

async fn qa(State(state): State<Arc<AppState>>, Json(req): Json<QaRequest>) -> ApiResult<Answer> {
    if req.query.trim().is_empty() {
        return Err(ApiError::bad_request("query is empty"));
    }
    if req.k == Some(0) {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let index = state.read().index.clone().ok_or_else(|| ApiError::not_ready("index"))?;
    let settings = QaSettings {
        k: req.k.unwrap_or(state.config.qa.k),
        ..state.config.qa_settings()
    };
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        let res = &worker.resources;
        let gateway = res.gateway(&worker.config);
        answer(&req.query, &index, res.embedder.as_ref(), &gateway, &res.rag_template, settings)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    result
        .map(Json)
        .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "qa_failed", e.to_string()))
}

#[derive(Debug, Deserialize)]
struct AspectQuery {
    sentence_id: Option<String>,
}

async fn aspects(State(state): State<Arc<AppState>>, Query(q): Query<AspectQuery>) -> ApiResult<SentenceResult> {
    let id = q.sentence_id.ok_or_else(|| ApiError::bad_request("missing query parameter sentence_id"))?;
    state
        .read()
        .aspects
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no aspect results for sentence {id}")))
}

async fn latest_report(State(state): State<Arc<AppState>>) -> ApiResult<ReportBundle> {
    state.read().report.clone().map(Json).ok_or_else(|| ApiError::not_ready("report"))
}
