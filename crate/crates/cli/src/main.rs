use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use commute_grid::api::ScenarioRequest;
use commute_grid::config::{self, RunConfig};
use commute_grid::demo;
use commute_grid::energy::Policy;
use commute_grid::pipeline::{write_artifacts, Inputs, ScenarioSpec, Settings, Sources};
use commute_grid::sampler::{PresetName, WeightVector, WfhLevel};
use commute_grid_client::Client;
use commute_grid_service::AppState;

#[derive(Parser)]
#[command(name = "commute-grid", version, about = "Commute mode scenarios, charging demand and grid capacity")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full pipeline and write artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the bundled demo dataset end to end.
    Demo {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Start the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Config to load; the bundled demo dataset when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a scenario on a running server.
    Scenario {
        #[command(flatten)]
        remote: Remote,
        #[arg(long, conflicts_with = "weights")]
        preset: Option<PresetName>,
        /// Category weights `transit,car,micromobility,wfh`.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value = "medium")]
        wfh_level: WfhLevel,
        #[arg(long, default_value = "earliest")]
        policy: Policy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lambda: Option<f64>,
        /// Print the raw JSON response.
        #[arg(long)]
        json: bool,
    },
    /// Fetch the capacity envelope from a running server.
    Capacity {
        #[command(flatten)]
        remote: Remote,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Args)]
struct Remote {
    /// Server root, e.g. http://127.0.0.1:8080
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    server: String,
}

#[derive(Args)]
struct RunArgs {
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Policies to evaluate (overrides the config).
    #[arg(long = "policy")]
    policies: Vec<Policy>,
    /// Scenario seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = if cli.quiet { "error" } else { "info" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(filter)),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Validate { config } => {
            let diags = config::validate(&config);
            if diags.is_empty() {
                if !quiet {
                    println!("{}: ok", config.display());
                }
                return Ok(ExitCode::SUCCESS);
            }
            for d in &diags {
                println!("{d}");
            }
            Ok(ExitCode::FAILURE)
        }
        Command::Run { config, run } => {
            let cfg = RunConfig::load(&config)?;
            let sources = cfg.sources()?;
            let out = run.out.clone().unwrap_or_else(|| cfg.output_dir());
            execute(&cfg, sources, &run, &out, quiet)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Demo { run } => {
            let cfg = demo::config();
            let out = run.out.clone().unwrap_or_else(|| PathBuf::from("demo-out"));
            execute(&cfg, demo::sources(), &run, &out, quiet)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { port, host, data } => {
            let (sources, settings) = match &data {
                Some(p) => {
                    let cfg = RunConfig::load(p)?;
                    (cfg.sources()?, cfg.settings())
                }
                None => (demo::sources(), demo::config().settings()),
            };
            runtime()?.block_on(serve(&host, port, sources, settings))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenario { remote, preset, weights, wfh_level, policy, seed, lambda, json } => {
            let weights = weights.as_deref().map(parse_weights).transpose()?;
            if preset.is_none() && weights.is_none() {
                bail!("give --preset or --weights");
            }
            let req = ScenarioRequest { preset, weights, wfh_level, policy, seed, lambda };
            let client = Client::new(remote.server);
            let rt = runtime()?;
            if json {
                println!("{}", rt.block_on(client.scenario_raw(&req))?);
            } else {
                let resp = rt.block_on(client.scenario(&req))?;
                let h = &resp.headroom;
                println!("scenario {} ({}), policy {}", resp.scenario.name, resp.scenario.wfh_level.as_str(), resp.policy);
                for (c, v) in &resp.shares.by_trips {
                    println!("  {:<14} trips {:>6.1}%  distance {:>6.1}%", c.as_str(), 100.0 * v, 100.0 * resp.shares.by_distance[c]);
                }
                println!(
                    "peak {:.2} MW at hour {}, utilization {:.1}%, exceeded hours {:?}",
                    h.peak_mw,
                    h.peak_hour,
                    100.0 * h.utilization,
                    h.exceeded_hours
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Capacity { remote, lambda } => {
            let client = Client::new(remote.server);
            println!("{}", runtime()?.block_on(client.capacity_raw(lambda))?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().context("starting async runtime")
}

fn parse_weights(s: &str) -> Result<WeightVector> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("weight `{x}` is not a number")))
        .collect::<Result<_>>()?;
    let [transit, car, micromobility, wfh] = v[..] else {
        bail!("--weights needs four values: transit,car,micromobility,wfh");
    };
    Ok(WeightVector { transit, car, micromobility, wfh })
}

fn execute(cfg: &RunConfig, sources: Sources, args: &RunArgs, out: &Path, quiet: bool) -> Result<()> {
    let policies = if args.policies.is_empty() { cfg.policies.clone() } else { args.policies.clone() };
    if policies.is_empty() {
        bail!("policy list must not be empty");
    }
    let mut spec: ScenarioSpec = cfg.scenario.clone();
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let inputs = Inputs::from_sources(&sources, cfg.settings())?;
    let (envelope, _) = inputs.capacity(cfg.lambda)?;
    let eval = inputs.evaluate(&spec, &policies, &envelope)?;
    let written = write_artifacts(out, &eval, &envelope)?;
    if !quiet {
        print!("{}", eval.summary());
        println!("wrote {} files to {}", written.len(), out.display());
    }
    Ok(())
}

async fn serve(host: &str, port: u16, sources: Sources, settings: Settings) -> Result<()> {
    let state = Arc::new(AppState::new());
    let loader = state.load_in_background(move || Inputs::from_sources(&sources, settings));
    let listener = tokio::net::TcpListener::bind((host, port)).await.with_context(|| format!("binding {host}:{port}"))?;
    let server = tokio::spawn(commute_grid_service::serve(listener, state));
    loader.await?.context("loading datasets")?;
    server.await??;
    Ok(())
}
