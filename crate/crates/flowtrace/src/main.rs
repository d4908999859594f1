use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowtrace::scenario::{
    builtin_scenarios, find_scenario, load_config_file, pipeline, stage_analyze, stage_discover,
    stage_report, stage_simulate, ScenarioConfig,
};

/// Advection-diffusion testbed and temporal causal-discovery pipeline.
#[derive(Parser)]
#[command(name = "flowtrace", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenario catalog.
    Scenarios,
    /// Generate the velocity field and benchmark dataset for a scenario.
    Simulate(StageArgs),
    /// Run the skeleton search on a simulated bundle.
    Discover(StageArgs),
    /// Collapse the temporal graph into the location-level summary.
    Analyze(StageArgs),
    /// Render the figure panels and cost tables.
    Report(StageArgs),
    /// Run simulate, discover, analyze, and report in one go.
    Pipeline(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Built-in scenario name (see `scenarios`).
    #[arg(long)]
    scenario: Option<String>,
    /// JSON config file: a scenario config or a bundle provenance.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output bundle directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the message seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the CI-test significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the temporal subsampling factor.
    #[arg(long, value_name = "M")]
    subsample: Option<usize>,
    /// Allow same-tier (concurrent) edges.
    #[arg(long, overrides_with = "no_concurrent")]
    allow_concurrent: bool,
    /// Forbid same-tier edges a priori.
    #[arg(long = "no-concurrent")]
    no_concurrent: bool,
    /// Cap the number of worker threads (no effect on outputs).
    #[arg(long)]
    workers: Option<usize>,
}

impl StageArgs {
    /// Resolve the configuration: explicit file or scenario name for the
    /// simulate/pipeline entry points, the bundle provenance otherwise.
    fn resolve_config(&self, need_source: bool) -> Result<ScenarioConfig, String> {
        let mut cfg = if let Some(path) = &self.config {
            load_config_file(path).map_err(|e| e.to_string())?
        } else if let Some(name) = &self.scenario {
            find_scenario(name).ok_or_else(|| {
                format!("unknown scenario '{name}'; run `flowtrace scenarios` for the catalog")
            })?
        } else if need_source {
            return Err("pass --scenario NAME or --config FILE".to_string());
        } else {
            return Err(String::new()); // caller falls back to the bundle provenance
        };
        if let Some(seed) = self.seed {
            cfg.message.seed = seed;
        }
        if let Some(alpha) = self.alpha {
            cfg.alpha = alpha;
        }
        if let Some(m) = self.subsample {
            cfg.subsample = m;
        }
        if self.allow_concurrent {
            cfg.allow_concurrent = true;
        }
        if self.no_concurrent {
            cfg.allow_concurrent = false;
        }
        Ok(cfg)
    }

    fn install_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match self.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("worker pool")
                .install(f),
            None => f(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Scenarios => {
            println!(
                "{:<30} {:>6} {:>4} {:>5} {:>5} {:>3} {:>11}",
                "name", "grid", "M", "C", "kappa", "S", "concurrent"
            );
            for cfg in builtin_scenarios() {
                println!(
                    "{:<30} {:>3}x{:<3} {:>3} {:>5} {:>2}/{:<2} {:>3} {:>11}",
                    cfg.name,
                    cfg.nx,
                    cfg.ny,
                    cfg.subsample,
                    cfg.courant,
                    cfg.kappa_x,
                    cfg.kappa_y,
                    cfg.tiers,
                    if cfg.allow_concurrent { "allowed" } else { "forbidden" }
                );
            }
            Ok(())
        }
        Command::Simulate(args) => {
            let cfg = args.resolve_config(true)?;
            args.install_pool(|| stage_simulate(&cfg, &args.out))
                .map_err(|e| e.to_string())
        }
        Command::Discover(args) => args
            .install_pool(|| stage_discover(&args.out))
            .map(|stats| {
                println!(
                    "skeleton: {} edges, max order {}, {:.2} s",
                    stats.final_edges, stats.max_order, stats.wall_seconds
                );
            })
            .map_err(|e| e.to_string()),
        Command::Analyze(args) => stage_analyze(&args.out).map_err(|e| e.to_string()),
        Command::Report(args) => stage_report(&args.out).map_err(|e| e.to_string()),
        Command::Pipeline(args) => {
            let cfg = args.resolve_config(true)?;
            args.install_pool(|| pipeline(&cfg, &args.out))
                .map_err(|e| e.to_string())
        }
    }
}
