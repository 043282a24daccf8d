use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use xeff_client::Client;
use xeff_core::analysis::report::{build_report, summarize_log, SessionEeg};
use xeff_core::api::CreateSession;
use xeff_core::catalog::io::{save_catalog, CatalogPaths};
use xeff_core::catalog::synthetic::bundled_corpus;
use xeff_core::catalog::{Catalog, ItemId};
use xeff_core::eeg::io::Recording;
use xeff_core::eeg::synthetic::SyntheticConfig;
use xeff_core::eeg::{extract_features, FeatureConfig};
use xeff_core::embed::{EmbedModel, TrainConfig};
use xeff_core::session::log::{read_dir, write_records, LogDir};
use xeff_core::session::{Context, Group, OnboardingRating};
use xeff_core::simulate::{run_simulation, synthetic_recording, SimConfig};
use xeff_service::AppState;

const MODEL_FILE: &str = "embed.json";

#[derive(Parser)]
#[command(name = "xeff", version, about = "Explainable recommendation sessions and efficacy analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Import MovieLens-style CSVs and train the item embedding.
    Ingest(IngestArgs),
    /// Run the simulated-user study and write session logs.
    Simulate(SimulateArgs),
    /// Build the report tables from session logs and EEG recordings.
    Analyze(AnalyzeArgs),
    /// Talk to a running service.
    Session {
        /// Service root URL.
        #[arg(long, default_value = "http://127.0.0.1:8080", env = "XEFF_SERVER")]
        server: String,
        #[command(subcommand)]
        command: SessionCommand,
    },
}

#[derive(Args)]
struct CatalogArgs {
    /// Directory with movies.csv (and optionally tags.csv, ratings.csv, embed.json).
    /// The bundled 200-item corpus is used when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Autoencoder epochs when no saved embedding is found.
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[command(flatten)]
    catalog: CatalogArgs,
    /// Base seed for sessions created without one.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Session log directory; existing logs are replayed at startup.
    #[arg(long, default_value = "sessions")]
    logs: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    movies: PathBuf,
    #[arg(long)]
    tags: Option<PathBuf>,
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Output directory, usable later as `--catalog`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Sessions per group.
    #[arg(long, default_value_t = 30)]
    sessions: usize,
    #[arg(long, default_value_t = 10)]
    trials: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a synthetic EEG recording per session under `<out>/eeg`.
    #[arg(long)]
    eeg: bool,
    #[command(flatten)]
    catalog: CatalogArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    sessions_dir: PathBuf,
    /// One `<session>.csv` recording (with its `.json` sidecar) per session.
    #[arg(long)]
    eeg_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Feedback,
    NonFeedback,
}

impl From<GroupArg> for Group {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Feedback => Group::Feedback,
            GroupArg::NonFeedback => Group::NonFeedback,
        }
    }
}

#[derive(Subcommand)]
enum SessionCommand {
    Health,
    /// Items to rate before creating a session.
    Onboarding {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    List,
    Create {
        #[arg(long, value_enum)]
        group: GroupArg,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Onboarding ratings as ITEM=RATING, repeated.
        #[arg(long = "rate", value_parser = parse_rating, required = true)]
        ratings: Vec<OnboardingRating>,
    },
    /// Current recommendation list.
    Show { id: String },
    Explain { id: String, item: u32 },
    /// Close the current trial and open the next.
    Next { id: String },
    Efficacy { id: String },
}

fn parse_rating(s: &str) -> Result<OnboardingRating, String> {
    let (item, rating) = s.split_once('=').ok_or("expected ITEM=RATING")?;
    Ok(OnboardingRating {
        item: ItemId(item.trim().parse().map_err(|e| format!("item: {e}"))?),
        rating: rating.trim().parse().map_err(|e| format!("rating: {e}"))?,
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve(a) => serve(a),
        Command::Ingest(a) => ingest(a),
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Session { server, command } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(session(Client::new(server), command))
        }
    }
}

fn load_context(args: &CatalogArgs) -> Result<Context> {
    let (catalog, saved) = match &args.catalog {
        Some(dir) => {
            let catalog = CatalogPaths::in_dir(dir)
                .load()
                .with_context(|| format!("loading catalog from {}", dir.display()))?;
            (catalog, Some(dir.join(MODEL_FILE)).filter(|p| p.exists()))
        }
        None => (bundled_corpus(), None),
    };
    let embed = match saved {
        Some(path) => {
            info!("loading embedding from {}", path.display());
            EmbedModel::load(&catalog, &path)?
        }
        None => train(&catalog, args.epochs)?,
    };
    Ok(Context { catalog, embed })
}

fn train(catalog: &Catalog, epochs: usize) -> Result<EmbedModel> {
    info!("training embedding on {} items for {epochs} epochs", catalog.len());
    let model = EmbedModel::train(catalog, &TrainConfig {
        epochs,
        ..TrainConfig::default()
    })?;
    if let Some(r) = &model.report {
        info!("reconstruction mse {:.4} -> {:.4}", r.initial_mse, r.final_mse);
    }
    Ok(model)
}

fn serve(a: ServeArgs) -> Result<()> {
    let ctx = Arc::new(load_context(&a.catalog)?);
    let logs = LogDir::new(&a.logs)?;
    let state = AppState::restore(ctx, logs, a.seed).context("replaying session logs")?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        info!("listening on http://{}", listener.local_addr()?);
        xeff_service::serve(listener, Arc::new(state)).await?;
        Ok(())
    })
}

fn ingest(a: IngestArgs) -> Result<()> {
    let catalog = xeff_core::catalog::io::load_catalog(&a.movies, a.tags.as_deref(), a.ratings.as_deref())?;
    info!(
        "{} items, {} features beyond the encoding width dropped",
        catalog.len(),
        catalog.dropped_features()
    );
    save_catalog(&catalog, &a.out)?;
    let model = train(&catalog, a.epochs)?;
    model.save(&a.out.join(MODEL_FILE))?;
    println!("{}", a.out.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let ctx = load_context(&a.catalog)?;
    let report = run_simulation(&ctx, &SimConfig {
        sessions_per_group: a.sessions,
        trials: a.trials,
        seed: a.seed,
        ..SimConfig::default()
    })?;
    let sessions = a.out.join("sessions");
    fs::create_dir_all(&sessions)?;
    let eeg_dir = a.out.join("eeg");
    if a.eeg {
        fs::create_dir_all(&eeg_dir)?;
    }
    for outcome in report.groups.iter().flat_map(|g| &g.sessions) {
        write_records(fs::File::create(sessions.join(format!("{}.jsonl", outcome.session)))?, &outcome.log)?;
        if a.eeg {
            let rec = synthetic_recording(outcome, &SyntheticConfig {
                seed: a.seed,
                ..SyntheticConfig::default()
            })?;
            rec.write(&eeg_dir.join(format!("{}.csv", outcome.session)))?;
        }
    }
    fs::write(a.out.join("summary.json"), serde_json::to_vec_pretty(&report)?)?;

    for g in &report.groups {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:?}: first-five {} last-five {}",
            g.group,
            fmt(g.first_five_mean),
            fmt(g.last_five_mean)
        );
    }
    if let Some(t) = &report.last_five_t {
        println!("last-five t = {:.3}, p = {:.4}", t.t, t.p);
    }
    Ok(())
}

fn read_eeg(dir: &Path, session: &str) -> Result<Option<SessionEeg>> {
    let path = dir.join(format!("{session}.csv"));
    if !path.exists() {
        log::warn!("no EEG recording for session {session}");
        return Ok(None);
    }
    let rec = Recording::read(&path)?;
    let cfg = FeatureConfig::default();
    let trials = rec
        .epochs()?
        .iter()
        .map(|e| extract_features(e, &rec.montage, &cfg))
        .collect::<xeff_core::Result<_>>()?;
    Ok(Some(SessionEeg {
        session: session.to_string(),
        trials,
    }))
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let logs = read_dir(&a.sessions_dir).with_context(|| format!("reading {}", a.sessions_dir.display()))?;
    if logs.is_empty() {
        bail!("no .jsonl session logs in {}", a.sessions_dir.display());
    }
    let summaries = logs.iter().map(|l| summarize_log(l)).collect::<xeff_core::Result<Vec<_>>>()?;
    let mut eeg = Vec::new();
    for s in &summaries {
        eeg.extend(read_eeg(&a.eeg_dir, &s.session)?);
    }
    info!("{} sessions, {} with EEG", summaries.len(), eeg.len());
    build_report(&summaries, &eeg)?.write_dir(&a.out)?;
    println!("{}", a.out.display());
    Ok(())
}

fn print(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

async fn session(client: Client, cmd: SessionCommand) -> Result<()> {
    match cmd {
        SessionCommand::Health => print(&client.health().await?),
        SessionCommand::Onboarding { count } => print(&client.onboarding(count).await?),
        SessionCommand::List => print(&client.sessions().await?),
        SessionCommand::Create {
            group,
            id,
            seed,
            ratings,
        } => print(
            &client
                .create_session(&CreateSession {
                    id,
                    group: group.into(),
                    seed,
                    onboarding: ratings,
                    config: None,
                })
                .await?,
        ),
        SessionCommand::Show { id } => print(&client.recommendations(&id).await?),
        SessionCommand::Explain { id, item } => print(&client.explanation(&id, ItemId(item)).await?),
        SessionCommand::Next { id } => print(&client.next_trial(&id).await?),
        SessionCommand::Efficacy { id } => print(&client.efficacy(&id).await?),
    }
}
