use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use freshlab::costs::CostProfile;
use freshlab_cli::commands::{self, ModelRequest};
use freshlab_cli::config::{self, ExperimentConfig, Horizon, OutputFormat, TRange};
use freshlab_cli::output;
use freshlab_cli::CliError;

#[derive(Parser)]
#[command(
    name = "freshlab",
    version,
    about = "Cache freshness model, simulator and sketch benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed forms for each (T, policy).
    Model(ModelArgs),
    /// Simulate each (T, policy) of a config and audit staleness.
    Simulate(RunArgs),
    /// Like `simulate`, with model columns next to the simulated ones.
    Sweep(RunArgs),
    /// Compare E[W] estimators against the exact tracker.
    SketchBench(SketchArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML: [workload], [costs], [sim], [output]).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// csv, json or gnuplot.
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct Grid {
    /// Policy descriptor; repeat for several (e.g. `--policy adaptive:estimator=rates`).
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Staleness bounds, comma separated.
    #[arg(long = "t", value_delimiter = ',')]
    t_values: Vec<f64>,
    /// Log-spaced T range as `min:max:points`.
    #[arg(long)]
    t_range: Option<String>,
    /// Horizon in seconds.
    #[arg(long, conflicts_with = "horizon_intervals")]
    horizon: Option<f64>,
    /// Horizon as a multiple of T.
    #[arg(long)]
    horizon_intervals: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: Grid,
    /// Request rate of a single key (overrides the config workload).
    #[arg(long, requires = "read_ratio")]
    lambda: Option<f64>,
    #[arg(long, requires = "lambda")]
    read_ratio: Option<f64>,
    #[command(flatten)]
    costs: CostFlags,
}

#[derive(Args)]
struct CostFlags {
    /// Explicit per-message costs; give all three or none.
    #[arg(long)]
    c_update: Option<f64>,
    #[arg(long)]
    c_invalidate: Option<f64>,
    #[arg(long)]
    c_miss: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: Grid,
    #[arg(long)]
    capacity: Option<usize>,
    /// Sweep worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Write an event transcript per (T, policy).
    #[arg(long)]
    transcript: bool,
    /// Write a per-key breakdown per (T, policy).
    #[arg(long)]
    per_key: bool,
    #[command(flatten)]
    costs: CostFlags,
}

#[derive(Args)]
struct SketchArgs {
    #[command(flatten)]
    common: Common,
    /// Estimator: `exact`, `cms:d=4,w=4096` or `topk:k=1000,d=4,w=4096`; repeat for several.
    #[arg(long = "estimator")]
    estimators: Vec<String>,
    /// Fill ns_per_record (wall-clock, so output is no longer reproducible).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    costs: CostFlags,
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(f) = common.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn apply_grid(cfg: &mut ExperimentConfig, grid: &Grid) -> Result<(), CliError> {
    if !grid.policies.is_empty() {
        cfg.policies = config::parse_policies(&grid.policies).map_err(CliError::Usage)?;
    }
    match (&grid.t_range, grid.t_values.is_empty()) {
        (Some(_), false) => return Err(CliError::Usage("give either --t or --t-range, not both".into())),
        (Some(spec), true) => cfg.t_values = parse_t_range(spec)?.values()?,
        (None, false) => cfg.t_values = grid.t_values.clone(),
        (None, true) => {}
    }
    if let Some(h) = grid.horizon {
        cfg.horizon = Horizon::Seconds(h);
    }
    if let Some(n) = grid.horizon_intervals {
        cfg.horizon = Horizon::Intervals(n);
    }
    Ok(())
}

fn parse_t_range(spec: &str) -> Result<TRange, CliError> {
    let bad = || CliError::Usage(format!("--t-range expects min:max:points, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [min, max, points] = parts[..] else {
        return Err(bad());
    };
    Ok(TRange {
        min: min.parse().map_err(|_| bad())?,
        max: max.parse().map_err(|_| bad())?,
        points: points.parse().map_err(|_| bad())?,
    })
}

fn apply_costs(cfg: &mut ExperimentConfig, flags: &CostFlags) -> Result<(), CliError> {
    match (flags.c_update, flags.c_invalidate, flags.c_miss) {
        (None, None, None) => Ok(()),
        (Some(u), Some(i), Some(m)) => {
            cfg.costs.profile = CostProfile {
                c_serve: cfg.costs.profile.c_serve,
                prioritize_latency: cfg.costs.profile.prioritize_latency,
                ..CostProfile::custom(u, i, m)
            };
            Ok(())
        }
        _ => Err(CliError::Usage(
            "--c-update, --c-invalidate and --c-miss go together".into(),
        )),
    }
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn model(args: ModelArgs) -> Result<(), CliError> {
    let mut cfg = load(&args.common)?;
    apply_grid(&mut cfg, &args.grid)?;
    apply_costs(&mut cfg, &args.costs)?;
    let costs = cfg.cost_params()?;
    let mut req = match (args.lambda, args.read_ratio) {
        (Some(l), Some(r)) => ModelRequest::single_key(l, r, costs),
        _ => {
            let spec = cfg
                .workload
                .as_ref()
                .ok_or_else(|| CliError::Usage("give --lambda/--read-ratio or a config with [workload]".into()))?;
            let keys = commands::key_classes(spec)
                .ok_or_else(|| CliError::Usage("the model needs a poisson or mixture workload, not a trace".into()))?;
            ModelRequest {
                keys,
                ..ModelRequest::single_key(1.0, 1.0, costs)
            }
        }
    };
    req.policies = cfg.policies.clone();
    req.t_values = cfg.t_values.clone();
    req.horizon = cfg.horizon.clone();
    let rows = commands::cmd_model(&req)?;
    report(&output::write_metrics(&cfg.out_dir, "model", cfg.format, &rows)?);
    Ok(())
}

fn simulate(args: RunArgs, sweep: bool) -> Result<(), CliError> {
    let mut cfg = load(&args.common)?;
    apply_grid(&mut cfg, &args.grid)?;
    apply_costs(&mut cfg, &args.costs)?;
    if let Some(c) = args.capacity {
        cfg.cache_capacity = c;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    cfg.transcript |= args.transcript;
    cfg.per_key |= args.per_key;
    let grid = commands::run_grid(&cfg, sweep)?;
    let stem = if sweep { "sweep" } else { "simulate" };
    let files = commands::emit_grid(&cfg, stem, &grid);
    if let Ok(files) = &files {
        report(files);
    }
    files.map(|_| ())
}

fn sketch_bench(args: SketchArgs) -> Result<(), CliError> {
    let mut cfg = load(&args.common)?;
    apply_costs(&mut cfg, &args.costs)?;
    if !args.estimators.is_empty() {
        cfg.estimators = config::parse_estimators(&args.estimators).map_err(CliError::Usage)?;
    }
    let rows = commands::sketch_bench_from_config(&cfg, args.timing)?;
    report(&output::write_sketch(&cfg.out_dir, "sketch_bench", cfg.format, &rows)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Model(a) => model(a),
        Command::Simulate(a) => simulate(a, false),
        Command::Sweep(a) => simulate(a, true),
        Command::SketchBench(a) => sketch_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("freshlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
