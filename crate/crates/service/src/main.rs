use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use reviewlens_service::config::Config;
use reviewlens_service::fixtures::{load_answer_key, synthesize};
use reviewlens_service::http::{router, AppState};
use reviewlens_service::pipeline::{run_pipeline, Resources, Stage};

#[derive(Parser)]
#[command(name = "reviewlens", version, about = "App-review analytics: sentiment, aspects, topics and grounded QA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Run directory for artifacts and the report bundle.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Load, deduplicate and language-filter the corpus.
    Ingest(Common),
    /// Lexicon-versus-star discrepancy per review.
    Discrepancy(Common),
    /// Aspect extraction, sentiment and recommendations.
    Aspects(Common),
    /// Topic discovery, labels and summaries (needs `index`).
    Topics(Common),
    /// Chunk and embed the corpus into a vector index.
    Index(Common),
    /// Answer the configured queries from the index (needs `index`).
    Qa(Common),
    /// Score aspect predictions against the gold file (needs `aspects`).
    Eval(Common),
    /// Every stage in order.
    Run(Common),
    /// Serve the HTTP API over a run directory.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Overrides `service.bind`.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Write stub fixtures covering every LLM call of a run.
    Fixtures {
        #[arg(long)]
        config: PathBuf,
        /// JSON list of expected aspect outputs per sentence.
        #[arg(long)]
        answer_key: PathBuf,
        /// Fixture JSONL to write.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &std::path::Path) -> Result<Config, String> {
    Config::load(path).map_err(|e| e.to_string())
}

fn batch(common: &Common, stages: &[Stage]) -> Result<(), String> {
    let config = load(&common.config)?;
    let bundle = run_pipeline(&config, &common.out, stages).map_err(|e| e.to_string())?;
    info!("config {}: wrote {} artifacts", bundle.config_hash, bundle.artifacts.len());
    println!("{}", common.out.join(format!("report.{}.json", bundle.config_hash)).display());
    Ok(())
}

fn serve(common: &Common, bind: Option<String>) -> Result<(), String> {
    let config = load(&common.config)?;
    let bind = bind.unwrap_or_else(|| config.service.bind.clone());
    std::fs::create_dir_all(&common.out).map_err(|e| format!("{}: {e}", common.out.display()))?;
    let resources = Resources::from_config(&config).map_err(|e| e.to_string())?;
    let state = AppState::open(config, resources, &common.out).map_err(|e| e.to_string())?;
    let app = router(Arc::new(state));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await.map_err(|e| format!("{bind}: {e}"))?;
        info!("listening on {bind}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string())
    })
}

fn fixtures(config: &std::path::Path, answer_key: &std::path::Path, out: &std::path::Path) -> Result<(), String> {
    let config = load(config)?;
    let key = load_answer_key(answer_key).map_err(|e| e.to_string())?;
    let table = synthesize(&config, &key).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    table.write_jsonl(&mut buf).map_err(|e| e.to_string())?;
    std::fs::write(out, buf).map_err(|e| format!("{}: {e}", out.display()))?;
    info!("{} fixtures written to {}", table.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(c) => batch(c, &[Stage::Ingest]),
        Command::Discrepancy(c) => batch(c, &[Stage::Discrepancy]),
        Command::Aspects(c) => batch(c, &[Stage::Aspects]),
        Command::Topics(c) => batch(c, &[Stage::Topics]),
        Command::Index(c) => batch(c, &[Stage::Index]),
        Command::Qa(c) => batch(c, &[Stage::Qa]),
        Command::Eval(c) => batch(c, &[Stage::Eval]),
        Command::Run(c) => batch(c, &Stage::ALL),
        Command::Serve { common, bind } => serve(common, bind.clone()),
        Command::Fixtures {
            config,
            answer_key,
            out,
        } => fixtures(config, answer_key, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
