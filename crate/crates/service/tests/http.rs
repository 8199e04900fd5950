use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use reviewlens_service::config::Config;
use reviewlens_service::http::{router, AppState};
use reviewlens_service::pipeline::{run_pipeline, Resources, Stage};

fn demo_config() -> Config {
    Config::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/config.toml")).unwrap()
}

fn app(dir: &Path, stages: &[Stage]) -> Router {
    let config = demo_config();
    if !stages.is_empty() {
        run_pipeline(&config, dir, stages).unwrap();
    }
    let resources = Resources::from_config(&config).unwrap();
    router(Arc::new(AppState::open(config, resources, dir).unwrap()))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    call(app, req).await
}

fn assert_error(body: &Value, code: &str) {
    assert_eq!(body["code"], code, "{body}");
    assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()), "{body}");
}

#[tokio::test]
async fn read_endpoints_serve_batch_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &Stage::ALL);

    let (s, body) = get(&app, "/discrepancy/summary").await;
    assert_eq!(s, StatusCode::OK);
    assert!(body["count"].as_u64().unwrap() > 0);
    assert!(body["histogram"].is_array());

    let (s, topics) = get(&app, "/topics").await;
    assert_eq!(s, StatusCode::OK);
    let topics = topics.as_array().unwrap();
    assert!(topics.len() >= 2);
    let counts: Vec<u64> = topics.iter().map(|t| t["count"].as_u64().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));

    let id = topics[0]["topic_id"].as_u64().unwrap();
    let (s, chunks) = get(&app, &format!("/topics/{id}/chunks")).await;
    assert_eq!(s, StatusCode::OK);
    let chunks = chunks.as_array().unwrap();
    assert_eq!(chunks.len() as u64, counts[0]);

    let chunk_id = chunks[0]["chunk_id"].as_str().unwrap();
    let (s, chunk) = get(&app, &format!("/chunks/{}", chunk_id.replace('#', "%23"))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(chunk["chunk_id"], chunk_id);

    let (s, aspects) = get(&app, "/aspects?sentence_id=g02").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(aspects["mentions"].as_array().unwrap().len(), 2);

    let (s, report) = get(&app, "/reports/latest").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(report["config_hash"], demo_config().hash());
}

#[tokio::test]
async fn lookups_of_unknown_ids_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &Stage::ALL);
    for uri in ["/topics/99/chunks", "/chunks/nope%230", "/aspects?sentence_id=zzz", "/jobs/job-42"] {
        let (s, body) = get(&app, uri).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{uri}");
        assert_error(&body, "not_found");
    }
    let (s, body) = get(&app, "/topics/abc/chunks").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&body, "bad_request");
    let (s, body) = get(&app, "/aspects").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&body, "bad_request");
}

#[tokio::test]
async fn qa_answers_with_citations_or_abstains() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &[Stage::Index]);

    let (s, ans) = post_json(&app, "/qa", json!({"query": "Does the app crash on login?"})).await;
    assert_eq!(s, StatusCode::OK, "{ans}");
    assert_eq!(ans["grounded"], true);
    let cited = ans["citations"][0].as_str().unwrap();
    let retrieved: Vec<&str> = ans["retrieved"]["hits"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["chunk_id"].as_str().unwrap())
        .collect();
    assert_eq!(retrieved.len(), 5);
    assert!(retrieved.contains(&cited));

    let (s, ans) = post_json(&app, "/qa", json!({"query": "How do I bake sourdough bread?", "k": 3})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ans["answer_text"], "not stated");
    assert_eq!(ans["grounded"], false);
    assert_eq!(ans["citations"], json!([]));
    assert_eq!(ans["retrieved"]["hits"].as_array().unwrap().len(), 3);

    let (s, body) = post_json(&app, "/qa", json!({"query": "ads", "k": 0})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&body, "bad_request");
    let (s, body) = post_json(&app, "/qa", json!({"query": "  "})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&body, "bad_request");
}

#[tokio::test]
async fn empty_run_directory_reports_not_ready() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &[]);
    for uri in ["/discrepancy/summary", "/reports/latest", "/chunks/a%230"] {
        let (s, body) = get(&app, uri).await;
        assert_eq!(s, StatusCode::CONFLICT, "{uri}");
        assert_error(&body, "not_ready");
    }
    let (s, body) = post_json(&app, "/qa", json!({"query": "ads"})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_error(&body, "not_ready");
    let (s, topics) = get(&app, "/topics").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(topics, json!([]));
}

fn multipart(parts: &[(&str, Option<&str>, &str)]) -> Request<Body> {
    let boundary = "reviewlens-test-boundary";
    let mut body = String::new();
    for (name, filename, content) in parts {
        body.push_str(&format!("--{boundary}\r\n"));
        match filename {
            Some(f) => body.push_str(&format!(
                "Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\n\r\n"
            )),
            None => body.push_str(&format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n")),
        }
        body.push_str(content);
        body.push_str("\r\n");
    }
    body.push_str(&format!("--{boundary}--\r\n"));
    Request::post("/ingest")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={boundary}"))
        .body(Body::from(body))
        .unwrap()
}

async fn wait_for_job(app: &Router, job_id: &str) -> Value {
    for _ in 0..200 {
        let (s, job) = get(app, &format!("/jobs/{job_id}")).await;
        assert_eq!(s, StatusCode::OK);
        if job["status"] == "done" || job["status"] == "failed" {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    panic!("job {job_id} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn ingest_job_replaces_index_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &[]);
    let csv = "id,body,stars\n\
               a,The app crashes every time I open it.,1\n\
               b,I love the new playlist feature so much.,5\n\
               c,,3\n";
    let schema = json!({"text": "body", "rating": "stars", "review_id": "id"}).to_string();
    let (s, accepted) = call(&app, multipart(&[("file", Some("upload.csv"), csv), ("schema", None, &schema)])).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{accepted}");
    let job_id = accepted["job_id"].as_str().unwrap().to_string();

    let job = wait_for_job(&app, &job_id).await;
    assert_eq!(job["status"], "done", "{job}");
    assert_eq!(job["progress"], 1.0);
    let artifacts = job["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        assert!(dir.path().join(a.as_str().unwrap()).exists(), "{a}");
    }

    let (s, summary) = get(&app, "/discrepancy/summary").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(summary["count"], 2);
    let (s, chunk) = get(&app, "/chunks/b%230").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(chunk["text"], "I love the new playlist feature so much.");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_uploads_are_rejected_or_fail_the_job() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &[]);

    let (s, body) = call(&app, multipart(&[("schema", None, "{}")])).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&body, "bad_request");

    let (s, body) = call(&app, multipart(&[("file", Some("x.csv"), "a\n1\n"), ("schema", None, "not json")])).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(body["message"].as_str().unwrap().contains("schema"));

    let schema = json!({"text": "missing", "rating": "stars"}).to_string();
    let (s, accepted) = call(&app, multipart(&[("file", Some("x.csv"), "body,stars\nhi,3\n"), ("schema", None, &schema)])).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let job = wait_for_job(&app, accepted["job_id"].as_str().unwrap()).await;
    assert_eq!(job["status"], "failed");
    assert!(job["error"].as_str().unwrap().contains("missing"), "{job}");
}
