//! `spurbench` — generate synthetic two-regime datasets, train paired MLP
//! heads, sweep experiment grids, and score feature dependence.
//!
//! Subcommands: `gen` (dataset CSV), `train` (checkpoints + manifest),
//! `sweep` (report CSV), `grid` (decision-boundary CSV), `metric`
//! (dependence report JSON). Exit codes: 0 success, 2 configuration or
//! input error, 3 training abort in single-run mode.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spurbench::dependence::{rois_report, RoisConfig, DEFAULT_DELTA, DEFAULT_PERMUTATIONS};
use spurbench::harness::{
    decision_grid, grid_to_csv, run_experiment, run_sweep, sweep_to_csv, ExperimentConfig,
    GridBounds, SweepConfig,
};
use spurbench::nn::{FeatureMatrix, Mlp};
use spurbench::scm::{generate_dataset, to_csv_string, DatasetSpec};
use spurbench::{Error, Result};

#[derive(Parser)]
#[command(
    name = "spurbench",
    version,
    about = "Spurious-correlation benchmark: data generators, paired MLP training, dependence metrics, experiment sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset CSV from a JSON spec.
    Gen(GenArgs),
    /// Train both heads once; write checkpoints and a run manifest.
    Train(TrainArgs),
    /// Run a sweep config and emit the report CSV.
    Sweep(SweepArgs),
    /// Evaluate two checkpoints' logits on a lattice for boundary plots.
    Grid(GridArgs),
    /// Score dependence between two feature CSVs (report JSON).
    Metric(MetricArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Dataset spec JSON: {"generator", "params", "n", "beta", ...}.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config JSON (generator, n_train, beta, arch, scheme, ...).
    #[arg(long)]
    config: PathBuf,
    /// Master seed for data, init, shuffling, and permutations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for model_a.json, model_b.json, manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the config's epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the config's learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Override the config's batch size.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config JSON: {"base", "axes", "replicate_seeds"}.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; every cell seed is derived from it.
    #[arg(long)]
    seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the base config's epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the base config's learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Override the base config's batch size.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct GridArgs {
    /// Checkpoint JSON for the A-head model.
    #[arg(long)]
    model_a: PathBuf,
    /// Checkpoint JSON for the B-head model.
    #[arg(long)]
    model_b: PathBuf,
    /// Rectangle as "x1_min,x1_max,x2_min,x2_max".
    #[arg(long, default_value = "-5,5,-5,5", allow_hyphen_values = true)]
    bounds: String,
    /// Lattice points per axis (inclusive of both edges).
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricArgs {
    /// Feature CSV for side A (rows = samples, columns = dimensions).
    #[arg(long)]
    features_a: PathBuf,
    /// Feature CSV for side B, same row count.
    #[arg(long)]
    features_b: PathBuf,
    /// Number of row permutations behind the calibration term.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    m: usize,
    /// Smoothing added to the calibration term's denominator.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Seed for the permutation stream.
    #[arg(long, default_value_t = 0)]
    perm_seed: u64,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", path.display()))
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_out(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Headerless numeric CSV -> feature matrix. A first line that does not
/// parse as numbers is treated as a header and skipped.
fn read_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let text = read_to_string(path)?;
    let parse_line = |line: &str| -> Option<Vec<f64>> {
        line.split(',')
            .map(|cell| cell.trim().parse::<f64>().ok())
            .collect()
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Some(row) => rows.push(row),
            None if idx == 0 => continue,
            None => {
                return Err(Error::Parse(format!(
                    "{}: line {} is not numeric CSV",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    FeatureMatrix::from_rows(&rows)
}

fn parse_bounds(s: &str) -> Result<GridBounds> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("bounds '{s}': {e}")))?;
    if parts.len() != 4 {
        return Err(Error::Parse(format!(
            "bounds '{s}': expected 4 comma-separated numbers"
        )));
    }
    Ok(GridBounds {
        x1_min: parts[0],
        x1_max: parts[1],
        x2_min: parts[2],
        x2_max: parts[3],
    })
}

fn apply_train_overrides(
    cfg: &mut ExperimentConfig,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
) {
    if let Some(v) = epochs {
        cfg.epochs = v;
    }
    if let Some(v) = lr {
        cfg.lr = v;
    }
    if let Some(v) = batch_size {
        cfg.batch_size = v;
    }
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let spec: DatasetSpec = parse_json(&args.config)?;
    let data = generate_dataset(&spec)?;
    write_out(&to_csv_string(&data.samples), args.out.as_deref())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = parse_json(&args.config)?;
    apply_train_overrides(&mut cfg, args.epochs, args.lr, args.batch_size);
    let result = run_experiment(&cfg, args.seed)?;
    fs::create_dir_all(&args.out_dir)?;
    fs::write(
        args.out_dir.join("model_a.json"),
        result.trained.model_a.to_json(),
    )?;
    fs::write(
        args.out_dir.join("model_b.json"),
        result.trained.model_b.to_json(),
    )?;
    let manifest = serde_json::to_string_pretty(&result.manifest(&cfg))?;
    fs::write(args.out_dir.join("manifest.json"), manifest)?;
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg: SweepConfig = parse_json(&args.config)?;
    apply_train_overrides(&mut cfg.base, args.epochs, args.lr, args.batch_size);
    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |p| p.get())
    });
    let rows = run_sweep(&cfg, args.seed, workers)?;
    write_out(&sweep_to_csv(&cfg, &rows), args.out.as_deref())
}

fn cmd_grid(args: &GridArgs) -> Result<()> {
    let model_a = Mlp::from_json(&read_to_string(&args.model_a)?)?;
    let model_b = Mlp::from_json(&read_to_string(&args.model_b)?)?;
    let bounds = parse_bounds(&args.bounds)?;
    let points = decision_grid(&model_a, &model_b, &bounds, args.resolution)?;
    write_out(&grid_to_csv(&points), args.out.as_deref())
}

fn cmd_metric(args: &MetricArgs) -> Result<()> {
    let f_a = read_feature_csv(&args.features_a)?;
    let f_b = read_feature_csv(&args.features_b)?;
    let cfg = RoisConfig {
        m: args.m,
        delta: args.delta,
        perm_seed: args.perm_seed,
    };
    let report = rois_report(&f_a, &f_b, &cfg)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_out(&text, args.out.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Metric(args) => cmd_metric(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
