//! Subcommands. Each returns a JSON summary that `main` prints on success.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nudge_core::analysis::{analyze_sessions, write_report};
use nudge_core::record::{read_jsonl, read_jsonl_dir};
use nudge_core::service::{
    artifacts_dir, collect_training_logs, run_experiment, simulate_cohort, train_policy_for, train_user_model_for, write_sessions,
    Artifacts, SessionManager, POLICY_FILE, USER_MODEL_FILE,
};
use nudge_core::user_model::save_params;
use nudge_core::{ExperimentConfig, InteractionRecord, QTable, Result};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "nudge-xai", version, about = "Explanation-biasing decision support workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config (TOML, or JSON by extension); defaults when absent.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Artifact directory, overriding the config and NUDGE_XAI_ARTIFACTS.
    #[arg(long)]
    pub artifacts: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = &self.artifacts {
            cfg.artifacts = Some(a.clone());
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured cohort once and write one JSONL log per session.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "sessions")]
        out: PathBuf,
    },
    /// Train the suggestion policy and save it to the artifact directory.
    TrainPolicy {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train the user model on interaction logs (collected with the saved
    /// policy when no logs are given).
    TrainUsermodel {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// A JSONL file or a directory of them.
        #[arg(long)]
        logs: Option<PathBuf>,
    },
    /// Policy, log collection, user model, nudged cohort and analysis.
    RunExperiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "experiment")]
        out: PathBuf,
    },
    /// Cluster stored session logs and write the report.
    Analyze {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory of session JSONL files.
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Serve the session API.
    Serve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// 0 picks a free port; the bound port is printed.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Append every session's records to `<dir>/<session>.jsonl`.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        /// Serve the browser client from this directory.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Allowed CORS origin; any origin when absent.
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

fn read_logs(path: &Path) -> Result<Vec<InteractionRecord>> {
    if path.is_dir() {
        Ok(read_jsonl_dir(path)?.into_iter().flatten().collect())
    } else {
        read_jsonl(path)
    }
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let artifacts = Artifacts::load(cfg, &artifacts_dir(cfg))?;
    let sessions = simulate_cohort(cfg, &artifacts)?;
    let files = write_sessions(out, &sessions)?;
    Ok(json!({ "sessions": files.len(), "out": out }))
}

pub fn train_policy(cfg: &ExperimentConfig) -> Result<Value> {
    let (q, summary) = train_policy_for(cfg)?;
    let dir = artifacts_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(POLICY_FILE);
    q.save(&path)?;
    Ok(json!({ "policy": path, "summary": summary }))
}

pub fn train_user_model(cfg: &ExperimentConfig, logs: Option<&Path>) -> Result<Value> {
    let dir = artifacts_dir(cfg);
    let records = match logs {
        Some(p) => read_logs(p)?,
        None => {
            let policy_path = dir.join(POLICY_FILE);
            if !policy_path.is_file() {
                return Err(nudge_core::Error::MissingArtifacts(vec![policy_path.display().to_string()]));
            }
            collect_training_logs(cfg, Arc::new(QTable::load(&policy_path)?))?
        }
    };
    let (model, report) = train_user_model_for(cfg, &records)?;
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(USER_MODEL_FILE);
    save_params(&model.params, &path)?;
    report.write_csv(std::fs::File::create(dir.join("user_model_training.csv"))?)?;
    Ok(json!({
        "user_model": path,
        "records": records.len(),
        "final_train_loss": report.epochs.last().map(|e| e.train_loss),
        "final_val_loss": report.final_val_loss(),
    }))
}

pub fn experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let o = run_experiment(cfg, out)?;
    let clusters: Vec<Value> = o
        .report
        .clusters
        .iter()
        .map(|c| json!({ "name": c.name, "size": c.size, "mean_abs_error": c.mean_abs_error, "final_assets": c.final_assets }))
        .collect();
    Ok(json!({ "out": out, "sessions": o.sessions, "training_records": o.training_records, "clusters": clusters }))
}

pub fn analyze(cfg: &ExperimentConfig, logs: &Path, out: &Path) -> Result<Value> {
    let sessions = read_jsonl_dir(logs)?;
    let report = analyze_sessions(&sessions, &cfg.analysis)?;
    write_report(out, &report)?;
    let clusters: Vec<Value> = report
        .clusters
        .iter()
        .map(|c| json!({ "name": c.name, "size": c.size, "mean_abs_error": c.mean_abs_error, "correlation": c.correlation, "final_assets": c.final_assets }))
        .collect();
    Ok(json!({ "out": out, "users": report.users.len(), "clusters": clusters }))
}

pub async fn serve(
    cfg: ExperimentConfig,
    host: &str,
    port: u16,
    log_dir: Option<PathBuf>,
    static_dir: Option<PathBuf>,
    cors_origin: Option<&str>,
) -> Result<()> {
    let manager = Arc::new(SessionManager::new(cfg, log_dir)?);
    let app = crate::http::router(manager, cors_origin, static_dir);
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    let addr = listener.local_addr()?;
    println!("{}", json!({ "listening": addr.to_string(), "port": addr.port() }));
    use std::io::Write;
    std::io::stdout().flush()?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Runs a parsed command; `serve` blocks until interrupted.
pub fn run(cli: Cli) -> Result<Option<Value>> {
    match cli.command {
        Command::Simulate { cfg, out } => simulate(&cfg.load()?, &out).map(Some),
        Command::TrainPolicy { cfg } => train_policy(&cfg.load()?).map(Some),
        Command::TrainUsermodel { cfg, logs } => train_user_model(&cfg.load()?, logs.as_deref()).map(Some),
        Command::RunExperiment { cfg, out } => experiment(&cfg.load()?, &out).map(Some),
        Command::Analyze { cfg, logs, out } => analyze(&cfg.load()?, &logs, &out).map(Some),
        Command::Serve { cfg, host, port, log_dir, static_dir, cors_origin } => {
            let cfg = cfg.load()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(cfg, &host, port, log_dir, static_dir, cors_origin.as_deref()))?;
            Ok(None)
        }
    }
}
