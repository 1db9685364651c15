use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use arbiter_core::fixture::{self, FixturePricing, FixtureSpec};
use arbiter_core::pipeline;
use arbiter_core::records::{read_embedding_sidecar, read_records, write_jsonl, write_records};
use arbiter_core::replay::{alpha_grid, single_model_baselines, sweep_alpha, SweepReport};
use arbiter_core::{load_artifact, save_artifact, EmbeddingVector, Router, TradeoffConfig, TrainConfig};
use arbiter_gateway::{GatewayConfig, GatewayState};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "arbiter", version, about = "Per-query model routing by accuracy/cost tradeoff")]
struct Cli {
    /// Log debug output to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit clusters and profiles from evaluation records; writes the artifact.
    Train(TrainArgs),
    /// Route one query (argument or stdin) and print the decision.
    Route(RouteArgs),
    /// Replay held-out records over a grid of alpha values.
    Sweep(SweepArgs),
    /// Run the HTTP gateway.
    Serve(ServeArgs),
    /// Render a saved sweep as Markdown or CSV.
    Report(ReportArgs),
    /// Write a synthetic record set, its embeddings and a matching config.
    GenFixture(FixtureArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Precomputed embeddings (JSONL of {query_id, embedding}).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Overrides both the split and clustering seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "router.json")]
    out: PathBuf,
    /// Where to write the held-out split; defaults to `<out stem>.test.jsonl`.
    #[arg(long)]
    test_out: Option<PathBuf>,
}

#[derive(Args)]
struct RouteArgs {
    #[arg(long)]
    artifact: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    top_p: Option<usize>,
    /// Query text; read from stdin when omitted.
    query: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Trained artifact; `--records` are then the held-out records to replay.
    #[arg(long, conflicts_with_all = ["config", "seeds"], required_unless_present = "config")]
    artifact: Option<PathBuf>,
    #[arg(long)]
    records: PathBuf,
    /// Train from `--records` once per seed instead of loading an artifact.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', requires = "config")]
    seeds: Vec<u64>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Explicit alpha values; overrides `--steps`.
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Evenly spaced alpha values over [0, 1].
    #[arg(long, default_value_t = 21)]
    steps: usize,
    #[arg(long)]
    top_p: Option<usize>,
    /// Directory for sweep.json, report.md and plot.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `artifact` in the gateway config.
    #[arg(long)]
    artifact: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    /// A sweep.json written by `sweep`.
    #[arg(long)]
    sweep: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PricingArg {
    Geometric,
    DefaultPool,
}

#[derive(Args)]
struct FixtureArgs {
    /// Records path; the sidecar and config are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 5)]
    models: usize,
    #[arg(long, default_value_t = 1200)]
    queries: usize,
    #[arg(long, default_value_t = 0.7)]
    specialization: f64,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    top_p: usize,
    #[arg(long, value_enum, default_value = "geometric")]
    pricing: PricingArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if cli.verbose {
            tracing::Level::DEBUG
        } else {
            tracing::Level::INFO
        })
        .init();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Route(a) => route(a),
        Command::Sweep(a) => sweep(a),
        Command::Serve(a) => serve(a),
        Command::Report(a) => report(a),
        Command::GenFixture(a) => gen_fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// `SOURCE_DATE_EPOCH` when set, so repeated runs produce identical artifacts.
fn creation_time() -> Result<DateTime<Utc>> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => {
            let secs: i64 = s.trim().parse().context("SOURCE_DATE_EPOCH is not an integer")?;
            DateTime::from_timestamp(secs, 0).context("SOURCE_DATE_EPOCH out of range")
        }
        Err(_) => Ok(Utc::now()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_cache(path: Option<&Path>) -> Result<Option<HashMap<String, EmbeddingVector>>> {
    path.map(|p| read_embedding_sidecar(p).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

fn load_train_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(TrainConfig::default()),
    }
}

fn train_once(
    records: &[arbiter_core::EvalRecord],
    cfg: &TrainConfig,
    cache: Option<&HashMap<String, EmbeddingVector>>,
) -> Result<pipeline::TrainOutcome> {
    let embedder = cfg.embedding.build()?;
    Ok(pipeline::train(records, cfg, embedder.as_ref(), cache, creation_time()?)?)
}

fn train(a: TrainArgs) -> Result<()> {
    let records = read_records(&a.records)?;
    let mut cfg = load_train_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg = cfg.with_seed(seed);
    }
    let cache = load_cache(a.embeddings.as_deref())?;
    let outcome = train_once(&records, &cfg, cache.as_ref())?;
    save_artifact(&outcome.artifact, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let test_out = a
        .test_out
        .unwrap_or_else(|| a.out.with_extension("test.jsonl"));
    write_records(&test_out, &outcome.test)?;
    tracing::info!(
        artifact = %a.out.display(),
        test_records = %test_out.display(),
        "training finished"
    );
    print_json(&outcome.summary)
}

fn route(a: RouteArgs) -> Result<()> {
    let query = match a.query {
        Some(q) => q,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let artifact = load_artifact(&a.artifact)?;
    let router = Router::new(artifact)?;
    let cfg_override = (a.alpha.is_some() || a.top_p.is_some()).then(|| {
        let d = router.artifact().default_cfg;
        TradeoffConfig {
            alpha: a.alpha.unwrap_or(d.alpha),
            top_p: a.top_p.unwrap_or(d.top_p),
        }
    });
    let decision = router.route(query.trim(), cfg_override)?;
    print_json(&decision)
}

fn sweep_router(
    router: Router,
    test: &[arbiter_core::EvalRecord],
    alphas: &[f64],
    top_p: Option<usize>,
    cache: Option<&HashMap<String, EmbeddingVector>>,
) -> Result<SweepReport> {
    let router = match top_p {
        Some(p) => {
            let mut artifact = router.artifact().clone();
            artifact.default_cfg.top_p = p;
            artifact.default_cfg.validate(Some(artifact.profiles.k()))?;
            let embedder = router.artifact().embedding_cfg.build()?;
            Router::with_embedder(artifact, embedder)?
        }
        None => router,
    };
    let reports = sweep_alpha(&router, test, alphas, cache)?;
    let baselines = single_model_baselines(test, &router.artifact().registry)?;
    Ok(SweepReport::new(
        router.artifact().content_digest.clone(),
        reports,
        baselines,
    ))
}

fn write_sweep_outputs(dir: &Path, report: &SweepReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep.json"), serde_json::to_vec_pretty(report)?)?;
    std::fs::write(dir.join("report.md"), report.to_markdown())?;
    std::fs::write(dir.join("plot.csv"), report.plot_csv())?;
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let alphas = if a.alphas.is_empty() {
        alpha_grid(a.steps)
    } else {
        a.alphas.clone()
    };
    if alphas.is_empty() {
        bail!("no alpha values to sweep");
    }
    let records = read_records(&a.records)?;
    let cache = load_cache(a.embeddings.as_deref())?;

    if let Some(path) = &a.artifact {
        let router = Router::new(load_artifact(path)?)?;
        let report = sweep_router(router, &records, &alphas, a.top_p, cache.as_ref())?;
        if let Some(dir) = &a.out {
            write_sweep_outputs(dir, &report)?;
        }
        return print_json(&report);
    }

    let base = load_train_config(a.config.as_deref())?;
    let seeds = if a.seeds.is_empty() {
        vec![base.split.seed]
    } else {
        a.seeds.clone()
    };
    let mut all = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let cfg = base.clone().with_seed(seed);
        let outcome = train_once(&records, &cfg, cache.as_ref())?;
        let router = Router::new(outcome.artifact)?;
        let report = sweep_router(router, &outcome.test, &alphas, a.top_p, cache.as_ref())?;
        if let Some(dir) = &a.out {
            write_sweep_outputs(&dir.join(format!("seed-{seed}")), &report)?;
        }
        all.push(serde_json::json!({"seed": seed, "report": report}));
    }
    print_json(&all)
}

fn report(a: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.sweep)
        .with_context(|| format!("reading {}", a.sweep.display()))?;
    let report: SweepReport = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", a.sweep.display()))?;
    let rendered = match a.format {
        ReportFormat::Markdown => report.to_markdown(),
        ReportFormat::Csv => report.plot_csv(),
        ReportFormat::Json => serde_json::to_string_pretty(&report)? + "\n",
    };
    match &a.out {
        Some(p) => std::fs::write(p, rendered)?,
        None => std::io::stdout().lock().write_all(rendered.as_bytes())?,
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => GatewayConfig::load(p)?,
        None => GatewayConfig::default(),
    };
    if let Some(p) = a.artifact {
        cfg.artifact = Some(p);
    }
    if let Some(alpha) = a.alpha {
        cfg.alpha = Some(alpha);
    }
    if let Some(port) = a.port {
        cfg.set_port(port);
    }
    let path = cfg
        .artifact
        .clone()
        .context("no artifact given (use --artifact or set `artifact` in the config)")?;
    // Built before the async runtime starts: a remote embedder owns a blocking client.
    let router = Router::new(load_artifact(&path)?)?;
    let audit = arbiter_gateway::audit_sink(&cfg)?;
    let state = Arc::new(GatewayState::new(router, &cfg, audit)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.listen)
            .await
            .with_context(|| format!("binding {}", cfg.listen))?;
        arbiter_gateway::serve(listener, state).await?;
        Ok(())
    })
}

fn gen_fixture(a: FixtureArgs) -> Result<()> {
    let spec = FixtureSpec {
        seed: a.seed,
        n_clusters: a.clusters,
        n_models: a.models,
        n_queries: a.queries,
        specialization: a.specialization,
        dim: a.dim,
        pricing: match a.pricing {
            PricingArg::Geometric => FixturePricing::Geometric,
            PricingArg::DefaultPool => FixturePricing::DefaultPool,
        },
        top_p: a.top_p,
    };
    let fx = fixture::generate(&spec).map_err(anyhow::Error::msg)?;
    let emb_path = a.out.with_extension("embeddings.jsonl");
    let cfg_path = a.out.with_extension("config.toml");
    write_records(&a.out, &fx.records)?;
    write_jsonl(&emb_path, &fx.embeddings)?;
    std::fs::write(&cfg_path, fx.config.to_toml())?;
    print_json(&serde_json::json!({
        "records": a.out,
        "embeddings": emb_path,
        "config": cfg_path,
        "n_records": fx.records.len(),
    }))
}
