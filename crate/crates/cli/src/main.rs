//! `advisor`: solve models, build augmented models, run experiments, and
//! serve live sessions.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::{Duration, Instant};

use advisor_bridge::{Observability, RecordSink, Server, SessionOptions};
use advisor_core::augment::augment_types;
use advisor_core::suggest::SuggesterSpec;
use advisor_core::{extract_q, solve, MomdpModel, QTable, SolveParams};
use advisor_harness::experiment::{RECORDS_FILE, SUMMARY_FILE};
use advisor_harness::{read_jsonl, run_and_write, summarize, ExperimentConfig, Policies};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "advisor",
    version,
    about = "Planning with action suggestions of unknown reliability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model file and write its policy.
    Solve(SolveArgs),
    /// Build (and optionally solve) a suggestion-augmented model.
    Augment(AugmentArgs),
    /// Run an experiment and write records.jsonl and summary.csv.
    Run(RunArgs),
    /// Print the summary table of a finished run.
    Summarize(SummarizeArgs),
    /// Accept live suggester sessions over TCP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    precision: f64,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 300.0)]
    time: f64,
    /// Stop after this many backups; makes the result independent of speed.
    #[arg(long)]
    max_backups: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the extracted Q table here.
    #[arg(long)]
    q: Option<PathBuf>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Experiment config; solves every missing artifact under its policy dir.
    #[arg(long, conflicts_with_all = ["model", "q", "spec"])]
    config: Option<PathBuf>,
    /// Base model, for a type augmentation without solving.
    #[arg(long, requires_all = ["q", "spec", "out_dir"])]
    model: Option<PathBuf>,
    #[arg(long)]
    q: Option<PathBuf>,
    /// Suggester spec JSON: {"types": [...], "t_p": ..., "prior": [...]}.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "typed")]
    stem: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Run directory or records file.
    path: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObservabilityArg {
    Full,
    WallBand,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    /// `host:port`, or `:port` for every interface.
    #[arg(long, default_value = ":8707")]
    listen: String,
    /// Seconds a client has to answer before no suggestion is assumed.
    #[arg(long, default_value_t = 30.0)]
    deadline: f64,
    #[arg(long, value_enum, default_value = "full")]
    observability: ObservabilityArg,
    /// Append finished trial records here.
    #[arg(long)]
    records: Option<PathBuf>,
}

/// Config problems exit with 2, everything else with 1.
struct ConfigError(anyhow::Error);

fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    if !path.exists() {
        return Err(ConfigError(anyhow::anyhow!(
            "config file not found: {}",
            path.display()
        )));
    }
    ExperimentConfig::load(path).map_err(|e| ConfigError(e.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a).map_err(Failure::Other),
        Command::Augment(a) => cmd_augment(a),
        Command::Run(a) => cmd_run(a),
        Command::Summarize(a) => cmd_summarize(a).map_err(Failure::Other),
        Command::Serve(a) => cmd_serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(ConfigError(e))) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

enum Failure {
    Config(ConfigError),
    Other(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<()> {
    let model = MomdpModel::load(&a.model)?;
    let params = SolveParams {
        target_precision: a.precision,
        time_budget: a.time,
        max_backups: a.max_backups.unwrap_or(usize::MAX),
        rng_seed: a.seed,
    };
    let policy = solve(&model, &params)?;
    policy.save(&a.out)?;
    if let Some(q) = &a.q {
        extract_q(&model, &policy)?.save(q)?;
    }
    let s = &policy.stats;
    println!(
        "lower {:.6} upper {:.6} gap {:.6} backups {} in {:.1} s -> {}",
        s.lower,
        s.upper,
        s.upper - s.lower,
        s.backups,
        s.wall_time_secs,
        a.out.display()
    );
    Ok(())
}

fn cmd_augment(a: AugmentArgs) -> Result<(), Failure> {
    if let Some(path) = &a.config {
        let cfg = load_config(path)?;
        if cfg.agent.suggester_spec().is_none() && !cfg.ask.enabled {
            return Err(anyhow::anyhow!(
                "agent {} plans without an augmented model",
                cfg.agent.label()
            )
            .into());
        }
        let t = Instant::now();
        let pol = Policies::prepare(&cfg).map_err(anyhow::Error::from)?;
        let aug = pol.augmented.as_ref().expect("typed or asking agent");
        let s = &aug.policy.stats;
        println!(
            "{}: {} hidden x {} visible states, lower {:.4} upper {:.4} ({:.1} s) in {}",
            cfg.agent.label(),
            aug.model.model.y_count,
            aug.model.model.x_count,
            s.lower,
            s.upper,
            t.elapsed().as_secs_f64(),
            cfg.policies.dir.display()
        );
        return Ok(());
    }
    let (Some(model), Some(q), Some(spec), Some(out)) = (&a.model, &a.q, &a.spec, &a.out_dir)
    else {
        return Err(anyhow::anyhow!(
            "give either --config, or --model with --q, --spec and --out-dir"
        )
        .into());
    };
    let run = || -> anyhow::Result<()> {
        let base = MomdpModel::load(model)?;
        let q = QTable::load(q)?;
        let text =
            std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
        let spec: SuggesterSpec = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", a.spec.as_ref().unwrap().display()))?;
        spec.validate()?;
        let typed = augment_types(&base, &spec, &q)?;
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        typed.save(out, &a.stem)?;
        println!(
            "wrote {}/{}.model.json ({} hidden states)",
            out.display(),
            a.stem,
            typed.model.y_count
        );
        Ok(())
    };
    run().map_err(Failure::Other)
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let Some(out) = a.out.or_else(|| cfg.output.clone()) else {
        return Err(ConfigError(anyhow::anyhow!(
            "{}: no output directory; pass --out or set \"output\"",
            a.config.display()
        ))
        .into());
    };
    let t = Instant::now();
    let pol = Policies::prepare(&cfg).map_err(anyhow::Error::from)?;
    let solved = t.elapsed().as_secs_f64();
    let (records, summary) = run_and_write(&cfg, &pol, &out).map_err(anyhow::Error::from)?;
    println!(
        "{} trials in {:.1} s (policies {:.1} s) -> {}",
        records.len(),
        t.elapsed().as_secs_f64(),
        solved,
        out.display()
    );
    for metric in ["undiscounted_reward", "discounted_reward", "asks"] {
        if let Some(s) = summary.overall(metric) {
            println!("  {metric}: {:.4} +- {:.4}", s.mean, s.ci95_half_width);
        }
    }
    Ok(())
}

fn cmd_summarize(a: SummarizeArgs) -> anyhow::Result<()> {
    let path = if a.path.is_dir() {
        a.path.join(RECORDS_FILE)
    } else {
        a.path.clone()
    };
    if !path.exists() {
        bail!("no records at {}", path.display());
    }
    let records = read_jsonl(&path)?;
    let summary = summarize(&records)?;
    print!("{}", summary.to_csv());
    if a.path.is_dir() && !a.path.join(SUMMARY_FILE).exists() {
        std::fs::write(a.path.join(SUMMARY_FILE), summary.to_csv())?;
    }
    Ok(())
}

/// `:8707` means every interface.
fn listen_addr(spec: &str) -> String {
    match spec.strip_prefix(':') {
        Some(port) => format!("0.0.0.0:{port}"),
        None => spec.to_owned(),
    }
}

fn cmd_serve(a: ServeArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    if !(a.deadline > 0.0 && a.deadline.is_finite()) {
        return Err(anyhow::anyhow!("--deadline must be a positive number of seconds").into());
    }
    let run = || -> anyhow::Result<()> {
        let pol = Policies::prepare(&cfg)?;
        let sink = match &a.records {
            Some(p) => RecordSink::to_file(p)?,
            None => RecordSink::in_memory(),
        };
        let opts = SessionOptions {
            deadline: Duration::from_secs_f64(a.deadline),
            observability: match a.observability {
                ObservabilityArg::Full => Observability::Full,
                ObservabilityArg::WallBand => Observability::WallBand,
            },
        };
        let addr = listen_addr(&a.listen);
        let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
        println!("listening on {}", listener.local_addr()?);
        Server::new(cfg.clone(), pol, opts, sink)
            .serve(listener, Arc::new(AtomicBool::new(false)))?;
        Ok(())
    };
    run().map_err(Failure::Other)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_port_listens_everywhere() {
        assert_eq!(listen_addr(":8707"), "0.0.0.0:8707");
        assert_eq!(listen_addr("127.0.0.1:9"), "127.0.0.1:9");
    }

    #[test]
    fn arguments_parse() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from([
            "advisor",
            "serve",
            "--config",
            "x.json",
            "--observability",
            "wall-band",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Serve(ServeArgs { .. })));
        assert!(
            Cli::try_parse_from(["advisor", "augment", "--config", "c", "--model", "m"]).is_err()
        );
    }
}
