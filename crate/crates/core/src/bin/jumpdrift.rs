use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use jumpdrift::harness::{fit_collection, run_calibration, write_calibration_csv, ExperimentConfig, KappaSetting};
use jumpdrift::io::{read_trajectory_csv, write_curve_csv, write_trajectory_csv, SavedEstimate};
use jumpdrift::selection::{select, DEFAULT_KAPPA};
use jumpdrift::{
    build_collection, export_report, fit, responses, run_experiment, simulate_path, truncated_responses,
    truncation_threshold, DimensionPolicy, Error, Interval, ModelConfig, PenaltySpec, Preset, Result,
    SimulationOptions, SplineSpace,
};

/// Jump-diffusion simulation and adaptive drift estimation.
#[derive(Parser)]
#[command(name = "jumpdrift", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as `t,x` CSV.
    Simulate(SimulateArgs),
    /// Fit a drift estimate to a trajectory CSV and write its curve.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment described by a TOML config.
    Experiment(ExperimentArgs),
    /// Calibrate the penalty constant for a config.
    CalibrateKappa(CalibrateArgs),
    /// Evaluate a saved estimate on a grid.
    ExportCurve(ExportCurveArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Reference model.
    #[arg(long, default_value = "model1", value_parser = parse_preset)]
    model: Preset,
    /// Estimation interval as `lo,hi`.
    #[arg(long, default_value = "-1,1", value_parser = parse_interval)]
    interval: Interval,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    fine_substeps: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x0: f64,
    #[arg(long, default_value_t = 0.0)]
    burn_in: f64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Plain,
    Truncated,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Trajectory CSV with header `t,x`.
    #[arg(long, short)]
    input: PathBuf,
    /// Level m; with --degree fits the single space S(m, r), otherwise selects adaptively.
    #[arg(long, requires = "degree")]
    level: Option<u32>,
    #[arg(long, requires = "level")]
    degree: Option<usize>,
    #[arg(long, value_enum, default_value = "plain")]
    kind: Kind,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: f64,
    /// Largest model dimension for adaptive selection; `theory` uses the rate-based bound.
    #[arg(long, default_value = "35", value_parser = parse_policy)]
    max_dimension: DimensionPolicy,
    #[arg(long, default_value_t = 512)]
    points: usize,
    /// Curve CSV `x,bhat`.
    #[arg(long, short)]
    output: PathBuf,
    /// Also write the fitted coefficients as JSON.
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Writes `kappa,mean_D,frac_max_D`.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExportCurveArgs {
    /// JSON written by `estimate --coefficients`.
    #[arg(long, short)]
    coefficients: PathBuf,
    #[arg(long, default_value_t = 512)]
    points: usize,
    #[arg(long, short)]
    output: PathBuf,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    Preset::parse(s).ok_or_else(|| format!("unknown model `{s}` (expected model1..model4)"))
}

fn parse_interval(s: &str) -> std::result::Result<Interval, String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo = lo.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = hi.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Interval::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_policy(s: &str) -> std::result::Result<DimensionPolicy, String> {
    if s == "theory" {
        return Ok(DimensionPolicy::Theory);
    }
    s.parse::<usize>()
        .map(|value| DimensionPolicy::Fixed { value })
        .map_err(|_| format!("expected a dimension or `theory`, got `{s}`"))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn simulate(args: SimulateArgs) -> Result<serde_json::Value> {
    let (coeffs, measure) = ModelConfig::preset(args.model.model).resolve(args.model.interval)?;
    let options = SimulationOptions {
        fine_substeps: args.fine_substeps,
        x0: args.x0,
        burn_in: args.burn_in,
        ..SimulationOptions::new(args.n, args.delta)
    };
    let traj = simulate_path(&coeffs, &measure, &options, args.seed)?;
    write_trajectory_csv(&traj, &args.output)?;
    Ok(json!({ "observations": traj.observations().len(), "output": args.output }))
}

fn estimate(args: EstimateArgs) -> Result<serde_json::Value> {
    let interval = args.model.interval;
    let (coeffs, _) = ModelConfig::preset(args.model.model).resolve(interval)?;
    let traj = read_trajectory_csv(&args.input)?;
    let resp = match args.kind {
        Kind::Plain => responses(&traj),
        Kind::Truncated => {
            let threshold = truncation_threshold(&coeffs, traj.delta(), traj.n())?;
            truncated_responses(&traj, threshold, interval)?
        }
    };
    let estimate = match (args.level, args.degree) {
        (Some(level), Some(degree)) => fit(&SplineSpace::new(level, degree, interval)?, &traj, &resp)?,
        _ => {
            let collection = build_collection(traj.n(), traj.delta(), &[1, 2, 3], args.max_dimension)?;
            let fits = fit_collection(
                &collection.spaces(interval)?,
                &traj,
                &resp,
                jumpdrift::estimator::DEFAULT_CONDITIONING_FLOOR,
            )?;
            let spec = PenaltySpec::new(args.kappa, coeffs.bounds().variance_scale(), traj.n(), traj.delta())?;
            select(&fits, &spec)?.1.clone()
        }
    };
    let saved = SavedEstimate::from_estimate(&estimate);
    let (grid, values) = saved.curve(args.points)?;
    write_curve_csv(&args.output, &grid, &[("bhat", &values)])?;
    if let Some(path) = &args.coefficients {
        saved.save(path)?;
    }
    Ok(json!({
        "level": saved.level,
        "degree": saved.degree,
        "kind": saved.kind,
        "contrast": estimate.contrast,
        "usable": estimate.usable,
    }))
}

fn experiment(args: ExperimentArgs) -> Result<serde_json::Value> {
    let mut config = load_config(&args.config, args.seed)?;
    if args.output.is_some() {
        config.output.directory = args.output;
    }
    let dir = config
        .output
        .directory
        .clone()
        .ok_or_else(|| Error::Config("no output directory: set output.directory or pass --output".into()))?;
    let report = run_experiment(&config)?;
    export_report(&report, &dir)?;
    let a = &report.aggregates;
    Ok(json!({
        "included": a.included,
        "excluded": a.excluded,
        "kappa": report.kappa,
        "risk1": a.plain.risk,
        "risk2": a.truncated.risk,
        "or1": a.plain.mean_oracle,
        "or2": a.truncated.mean_oracle,
        "output": dir,
    }))
}

fn calibrate(args: CalibrateArgs) -> Result<serde_json::Value> {
    let mut config = load_config(&args.config, args.seed)?;
    config.estimation.kappa = KappaSetting::Fixed(DEFAULT_KAPPA);
    let calibration = run_calibration(&config)?;
    if let Some(path) = &args.output {
        write_calibration_csv(&calibration, path)?;
    }
    Ok(json!({
        "kappa": calibration.kappa,
        "warning": calibration.warning,
        "failed_replications": calibration.failed_replications,
    }))
}

fn export_curve(args: ExportCurveArgs) -> Result<serde_json::Value> {
    let saved = SavedEstimate::load(&args.coefficients)?;
    let (grid, values) = saved.curve(args.points)?;
    write_curve_csv(&args.output, &grid, &[("bhat", &values)])?;
    Ok(json!({ "points": grid.len(), "output": args.output }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let message = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.is_empty() && !l.starts_with("Usage:"))
                .collect::<Vec<_>>()
                .join(" ");
            let message = message.trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": message }));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Experiment(a) => experiment(a),
        Command::CalibrateKappa(a) => calibrate(a),
        Command::ExportCurve(a) => export_curve(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
