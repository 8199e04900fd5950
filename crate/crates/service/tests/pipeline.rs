use std::fs;
use std::path::{Path, PathBuf};

use reviewlens_service::config::Config;
use reviewlens_service::fixtures::{load_answer_key, synthesize};
use reviewlens_service::pipeline::{run_pipeline, PipelineError, RunLock, Stage};
use reviewlens_service::report::tables;

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo")
}

fn demo_config() -> Config {
    Config::load(&demo().join("config.toml")).unwrap()
}

fn read_table(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn checked_in_fixtures_match_regeneration() {
    let config = demo_config();
    let key = load_answer_key(&demo().join("answer_key.json")).unwrap();
    let table = synthesize(&config, &key).unwrap();
    let mut buf = Vec::new();
    table.write_jsonl(&mut buf).unwrap();
    let on_disk = fs::read(demo().join("fixtures.jsonl")).unwrap();
    assert!(
        buf == on_disk,
        "demo/fixtures.jsonl is stale; regenerate it with `reviewlens fixtures`"
    );
}

#[test]
fn full_run_is_byte_identical_across_directories() {
    let config = demo_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_pipeline(&config, a.path(), &Stage::ALL).unwrap();
    let rb = run_pipeline(&config, b.path(), &Stage::ALL).unwrap();
    assert_eq!(ra, rb);
    for name in &ra.artifacts {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let report = format!("report.{}.json", ra.config_hash);
    assert_eq!(
        fs::read(a.path().join(&report)).unwrap(),
        fs::read(b.path().join(&report)).unwrap()
    );
    assert!(!a.path().join(".reviewlens.lock").exists());
}

#[test]
fn full_run_fills_every_section() {
    let config = demo_config();
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&config, dir.path(), &Stage::ALL).unwrap();
    assert_eq!(bundle.stages, Stage::ALL.to_vec());
    let ingest = bundle.ingest.as_ref().unwrap();
    assert_eq!(ingest.non_english_removed, 3);
    assert!(ingest.duplicates_removed >= 3);
    let disc = bundle.discrepancy.as_ref().unwrap();
    assert_eq!(disc.count, ingest.reviews);
    assert_eq!(disc.histogram.iter().map(|b| b.count).sum::<usize>(), disc.count);
    assert!(bundle.topics.as_ref().unwrap().topics.len() >= 2);
    let qa = bundle.qa.as_ref().unwrap();
    assert_eq!(qa.answers, 6);
    assert_eq!(qa.grounded, 5, "the off-topic query abstains");
    let eval = bundle.evaluation.as_ref().unwrap();
    assert_eq!(eval.extraction.len(), 2);
    assert_eq!(eval.sentiment.len(), 2);
    let audited: Vec<Stage> = bundle.audit.iter().map(|a| a.stage).collect();
    assert_eq!(audited, vec![Stage::Aspects, Stage::Topics, Stage::Qa]);
    assert!(bundle.audit.iter().all(|a| a.exchanges > 0));
    for name in &bundle.artifacts {
        assert!(name.contains(&bundle.config_hash), "{name}");
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn stages_run_separately_and_reuse_earlier_outputs() {
    let config = demo_config();
    let dir = tempfile::tempdir().unwrap();
    let index = run_pipeline(&config, dir.path(), &[Stage::Index]).unwrap();
    assert!(index.topics.is_none());
    let topics = run_pipeline(&config, dir.path(), &[Stage::Topics]).unwrap();
    assert!(topics.index.is_none());
    assert!(!topics.topics.unwrap().topics.is_empty());
    run_pipeline(&config, dir.path(), &[Stage::Aspects]).unwrap();
    let eval = run_pipeline(&config, dir.path(), &[Stage::Eval]).unwrap();
    assert!(eval.evaluation.is_some());
    assert!(eval.aspects.is_some());
}

#[test]
fn topics_without_index_is_a_prerequisite_error() {
    let config = demo_config();
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&config, dir.path(), &[Stage::Topics]).unwrap_err();
    match err {
        PipelineError::Prerequisite { stage, needs } => {
            assert_eq!(stage, "topics");
            assert!(needs.contains("index"), "{needs}");
        }
        other => panic!("unexpected {other}"),
    }
    let err = run_pipeline(&config, dir.path(), &[Stage::Qa]).unwrap_err();
    assert!(matches!(err, PipelineError::Prerequisite { stage: "qa", .. }));
    let err = run_pipeline(&config, dir.path(), &[Stage::Eval]).unwrap_err();
    assert!(matches!(err, PipelineError::Prerequisite { stage: "eval", .. }));
}

#[test]
fn locked_directory_is_refused() {
    let config = demo_config();
    let dir = tempfile::tempdir().unwrap();
    let _held = RunLock::acquire(dir.path()).unwrap();
    let err = run_pipeline(&config, dir.path(), &[Stage::Ingest]).unwrap_err();
    assert!(matches!(err, PipelineError::Locked(_)));
}

#[test]
fn missing_sections_export_header_only_tables() {
    let config = demo_config();
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&config, dir.path(), &[Stage::Ingest]).unwrap();
    for (stem, rows) in tables(&bundle) {
        assert_eq!(rows.len(), 1, "{stem} should be header-only");
        let on_disk = read_table(&dir.path().join(format!("{stem}.{}.csv", bundle.config_hash)));
        assert_eq!(on_disk, rows);
    }
}

#[test]
fn exported_tables_have_fixed_layouts() {
    let config = demo_config();
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&config, dir.path(), &Stage::ALL).unwrap();
    let table = |stem: &str| read_table(&dir.path().join(format!("{stem}.{}.csv", bundle.config_hash)));

    let ext = table("table-aspect-extraction");
    assert_eq!(ext[0], ["Model", "Precision", "Recall", "F1-Score"]);
    assert_eq!(ext.len(), 3);

    let dist = table("table-sentiment-distribution");
    assert_eq!(dist[0], ["Model", "Positive", "Negative", "Neutral"]);
    assert_eq!(dist[1][0], "LLM-based");
    assert_eq!(dist[2][0], "VADER");
    for row in &dist[1..] {
        let total: f64 = row[1..].iter().map(|c| c.trim_end_matches('%').parse::<f64>().unwrap()).sum();
        assert!((total - 100.0).abs() < 0.2, "{row:?}");
    }

    let metrics = table("table-sentiment-metrics");
    assert_eq!(metrics[0], ["Sentiment", "Precision", "Recall", "F1-Score"]);
    assert_eq!(metrics.last().unwrap()[0], "Weighted Avg");

    let sil = table("table-silhouette");
    assert_eq!(sil[0], ["Metric", "Reduced Space", "Embedding Space"]);
    let reduced: f64 = sil[1][1].parse().unwrap();
    assert!((-1.0..=1.0).contains(&reduced));

    let proxy = table("table-retrieval-proxy");
    assert_eq!(proxy[0], ["Query", "Avg. Cosine Sim.", "Diversity"]);
    assert_eq!(proxy.len(), 7);

    let topics = table("table-topics");
    assert_eq!(topics[0], ["topic_id", "count", "top_keywords", "label", "summary"]);
    let counts: Vec<usize> = topics[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    for row in &topics[1..] {
        assert!(row[3].split_whitespace().count() <= 8 && !row[3].contains('\n'));
    }
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "[corpus]\npath = \"r.csv\"\n[backend]\nkind = \"stub\"\nfixtures = \"f.jsonl\"\n[qa]\nk = 0\n",
    )
    .unwrap();
    let err = Config::load(&path).unwrap_err().to_string();
    assert!(err.contains("qa.k"), "{err}");
}
