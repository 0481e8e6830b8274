//! Experiment harness: single runs (generate, train, evaluate, score),
//! Cartesian sweeps over named parameter axes with replicate seeds, CSV
//! report emission, and decision-boundary grids for external plotting.
//!
//! Determinism contract: a run is a pure function of its config and one
//! master seed. The master seed fans out through fixed tags into the
//! training-set seed, the two test-set seeds, the shuffle stream, the two
//! init streams, and the permutation stream (see [`SeedPlan`]). Sweep cells
//! use `mix(master_seed, rep_seed)` as their cell seed, so rows sharing a
//! replicate seed are seed-paired across cells: cells that differ only in,
//! say, capacity see identical data, which makes per-seed comparisons
//! across a trend axis paired comparisons.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::dependence::{self, RoisConfig, DEFAULT_DELTA, DEFAULT_PERMUTATIONS};
use crate::error::{Error, Result};
use crate::nn::{self, Mlp, MlpArch, Target};
use crate::scm::{generate_dataset, DatasetSpec, GeneratorSpec};
use crate::seed::{self, tag};
use crate::training::{self, Scheme, TrainConfig, TrainedRun};

/// `(acc_obs - acc_int) / acc_obs`: how much of the observational accuracy
/// is lost under intervention. Negative values (the model did better on
/// interventional data) are legitimate and reported as-is.
pub fn relative_drop(acc_obs: f64, acc_int: f64) -> Result<f64> {
    if !acc_obs.is_finite() || !acc_int.is_finite() {
        return Err(Error::InvalidParameter {
            name: "accuracy",
            reason: "accuracies must be finite".into(),
        });
    }
    if acc_obs <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "relative drop undefined at observational accuracy {acc_obs}"
        )));
    }
    Ok((acc_obs - acc_int) / acc_obs)
}

/// Every derived seed a run uses, all fanned out from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub master: u64,
    pub train_data: u64,
    pub test_obs: u64,
    pub test_int: u64,
    pub init_a: u64,
    pub init_b: u64,
    pub shuffle: u64,
    pub permutation: u64,
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        SeedPlan {
            master,
            train_data: seed::mix(master, tag::TRAIN_DATA),
            test_obs: seed::mix(master, tag::TEST_OBS),
            test_int: seed::mix(master, tag::TEST_INT),
            init_a: seed::mix(master, tag::INIT_A),
            init_b: seed::mix(master, tag::INIT_B),
            shuffle: seed::mix(master, tag::SHUFFLE),
            permutation: seed::mix(master, tag::PERMUTATION),
        }
    }
}

/// Feature-dependence settings for a run; `None` in the config skips the
/// score. The permutation seed itself is derived per run, not configured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoisSettings {
    #[serde(default = "default_permutations")]
    pub m: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl Default for RoisSettings {
    fn default() -> Self {
        RoisSettings {
            m: DEFAULT_PERMUTATIONS,
            delta: DEFAULT_DELTA,
        }
    }
}

fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_half() -> f64 {
    0.5
}

fn default_lr() -> f64 {
    0.05
}

fn default_epochs() -> usize {
    200
}

fn default_batch_size() -> usize {
    64
}

fn default_n_test() -> usize {
    2000
}

/// One experiment cell: data recipe, architecture, and training settings.
/// Serialized with the generator flattened, so the JSON shape is
/// `{"generator": ..., "params": {...}, "n_train": ..., ...}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub generator: GeneratorSpec,
    pub n_train: usize,
    /// Fraction of training samples drawn under the observational regime.
    pub beta: f64,
    #[serde(default = "default_half")]
    pub p_a: f64,
    #[serde(default = "default_half")]
    pub p_int: f64,
    pub arch: MlpArch,
    pub scheme: Scheme,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Size of each of the two test sets (pure observational and pure
    /// interventional), generated fresh with seeds disjoint from training.
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub rois: Option<RoisSettings>,
}

impl ExperimentConfig {
    fn train_spec(&self, data_seed: u64) -> DatasetSpec {
        DatasetSpec {
            generator: self.generator,
            n: self.n_train,
            beta: self.beta,
            p_a: self.p_a,
            p_int: self.p_int,
            seed: data_seed,
        }
    }

    fn test_spec(&self, beta: f64, data_seed: u64) -> DatasetSpec {
        DatasetSpec {
            generator: self.generator,
            n: self.n_test,
            beta,
            p_a: self.p_a,
            p_int: self.p_int,
            seed: data_seed,
        }
    }

    fn train_config(&self, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            scheme: self.scheme,
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            shuffle_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_spec(0).validate()?;
        self.arch.validate()?;
        self.train_config(0).validate()?;
        if self.n_test < 1 {
            return Err(Error::InvalidParameter {
                name: "n_test",
                reason: "must be >= 1".into(),
            });
        }
        if let Some(r) = &self.rois {
            RoisConfig {
                m: r.m,
                delta: r.delta,
                perm_seed: 0,
            }
            .validate()?;
        }
        Ok(())
    }
}

/// The measured outcome of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub acc_obs_a: f64,
    pub acc_int_a: f64,
    pub acc_obs_b: f64,
    pub acc_int_b: f64,
    pub rel_drop_a: f64,
    /// Dependence of the A-model's features on the B-model's features over
    /// the interventional test split; absent when the config skips it.
    pub rois_ab: Option<f64>,
}

/// A finished run: metrics, the trained pair, and the seeds that fed it.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub metrics: RunMetrics,
    pub trained: TrainedRun,
    pub seeds: SeedPlan,
}

/// What the `train` subcommand records next to its checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seeds: SeedPlan,
    pub metrics: RunMetrics,
}

impl ExperimentResult {
    pub fn manifest(&self, config: &ExperimentConfig) -> RunManifest {
        RunManifest {
            config: *config,
            seeds: self.seeds,
            metrics: self.metrics,
        }
    }
}

/// Generate data, train both heads, evaluate on fresh pure-regime test
/// sets, and score feature dependence on the interventional split.
pub fn run_experiment(cfg: &ExperimentConfig, master_seed: u64) -> Result<ExperimentResult> {
    cfg.validate()?;
    let seeds = SeedPlan::new(master_seed);

    let train_data = generate_dataset(&cfg.train_spec(seeds.train_data))?;
    let test_obs = generate_dataset(&cfg.test_spec(1.0, seeds.test_obs))?;
    let test_int = generate_dataset(&cfg.test_spec(0.0, seeds.test_int))?;

    let trained = training::train(
        &train_data,
        &cfg.arch,
        &cfg.train_config(seeds.shuffle),
        master_seed,
    )?;

    let acc_obs_a = nn::accuracy(&trained.model_a, &test_obs.samples, Target::A)?;
    let acc_int_a = nn::accuracy(&trained.model_a, &test_int.samples, Target::A)?;
    let acc_obs_b = nn::accuracy(&trained.model_b, &test_obs.samples, Target::B)?;
    let acc_int_b = nn::accuracy(&trained.model_b, &test_int.samples, Target::B)?;
    let rel_drop_a = relative_drop(acc_obs_a, acc_int_a)?;

    let rois_ab = match &cfg.rois {
        Some(settings) => {
            let xs: Vec<[f64; 2]> = test_int.samples.iter().map(|s| s.x).collect();
            let f_a = nn::features(&trained.model_a, &xs);
            let f_b = nn::features(&trained.model_b, &xs);
            let rois_cfg = RoisConfig {
                m: settings.m,
                delta: settings.delta,
                perm_seed: seeds.permutation,
            };
            Some(dependence::rois(&f_a, &f_b, &rois_cfg)?)
        }
        None => None,
    };

    Ok(ExperimentResult {
        metrics: RunMetrics {
            acc_obs_a,
            acc_int_a,
            acc_obs_b,
            acc_int_b,
            rel_drop_a,
            rois_ab,
        },
        trained,
        seeds,
    })
}

/// A sweepable parameter. Axis values are carried as `f64` uniformly;
/// `depth` and `width` values must be positive integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    Beta,
    LambdaOff,
    RadiusRatio,
    Depth,
    Width,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::Beta => "beta",
            AxisParam::LambdaOff => "lambda_off",
            AxisParam::RadiusRatio => "radius_ratio",
            AxisParam::Depth => "depth",
            AxisParam::Width => "width",
        }
    }

    /// Stock grid used when a sweep axis lists no explicit values.
    pub fn default_values(self) -> &'static [f64] {
        match self {
            AxisParam::Beta => &[0.5, 0.9, 0.99, 0.999],
            AxisParam::LambdaOff => &[0.0, 1.0, 2.0, 4.0],
            AxisParam::RadiusRatio => &[0.25, 0.5, 1.0, 2.0, 4.0],
            AxisParam::Depth => &[1.0, 2.0, 3.0, 4.0],
            AxisParam::Width => &[4.0, 16.0, 64.0],
        }
    }

    fn check_value(self, v: f64, generator: &GeneratorSpec) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::Config(format!("axis {}: {reason}", self.name())))
        };
        if !v.is_finite() {
            return bad(format!("value {v} is not finite"));
        }
        match self {
            AxisParam::Beta => {
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("beta {v} outside [0, 1]"));
                }
            }
            AxisParam::LambdaOff => {
                if !matches!(generator, GeneratorSpec::Windmill(_)) {
                    return bad("lambda_off only applies to the windmill generator".into());
                }
            }
            AxisParam::RadiusRatio => {
                if !matches!(generator, GeneratorSpec::Circles(_)) {
                    return bad("radius_ratio only applies to the circles generator".into());
                }
                if v <= 0.0 {
                    return bad(format!("ratio {v} must be > 0"));
                }
            }
            AxisParam::Depth | AxisParam::Width => {
                if v < 1.0 || v.fract() != 0.0 || v > 1e6 {
                    return bad(format!("{v} is not a positive integer"));
                }
            }
        }
        Ok(())
    }

    fn apply(self, cfg: &mut ExperimentConfig, v: f64) -> Result<()> {
        self.check_value(v, &cfg.generator)?;
        match self {
            AxisParam::Beta => cfg.beta = v,
            AxisParam::LambdaOff => match &mut cfg.generator {
                GeneratorSpec::Windmill(p) => p.lambda_off = v,
                GeneratorSpec::Circles(_) => unreachable!("checked above"),
            },
            AxisParam::RadiusRatio => match &mut cfg.generator {
                // The ratio is the B-axis bound over the A-axis bound, so
                // the base r1_max is kept and r2_max is scaled.
                GeneratorSpec::Circles(p) => p.r2_max = v * p.r1_max,
                GeneratorSpec::Windmill(_) => unreachable!("checked above"),
            },
            AxisParam::Depth => cfg.arch.hidden_depth = v as usize,
            AxisParam::Width => cfg.arch.hidden_width = v as usize,
        }
        Ok(())
    }
}

/// One swept parameter with its value list. An empty (or omitted) list
/// means the stock grid for that parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: AxisParam,
    #[serde(default)]
    pub values: Vec<f64>,
}

/// A full sweep: base config, axes to vary, and replicate seeds. The run
/// grid is the Cartesian product of all axis values times the seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub axes: Vec<SweepAxis>,
    pub replicate_seeds: Vec<u64>,
}

impl SweepConfig {
    /// Copy with empty axis value lists replaced by the stock grids.
    pub fn normalized(&self) -> SweepConfig {
        let mut out = self.clone();
        for axis in &mut out.axes {
            if axis.values.is_empty() {
                axis.values = axis.param.default_values().to_vec();
            }
        }
        out
    }

    /// Validates the normalized form of the config.
    pub fn validate(&self) -> Result<()> {
        let cfg = self.normalized();
        cfg.base.validate()?;
        if cfg.axes.is_empty() {
            return Err(Error::Config("sweep needs at least one axis".into()));
        }
        for (i, axis) in cfg.axes.iter().enumerate() {
            if cfg.axes[..i].iter().any(|a| a.param == axis.param) {
                return Err(Error::Config(format!(
                    "axis {} listed more than once",
                    axis.param.name()
                )));
            }
            for &v in &axis.values {
                axis.param.check_value(v, &cfg.base.generator)?;
            }
        }
        if cfg.replicate_seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one replicate seed".into()));
        }
        Ok(())
    }
}

/// One report row: the cell's axis coordinates, its seeds, and either
/// metrics (status "ok") or a failure message with metrics absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub coords: Vec<f64>,
    pub rep_seed: u64,
    pub cell_seed: u64,
    pub metrics: Option<RunMetrics>,
    pub status: String,
}

struct Job {
    coords: Vec<f64>,
    rep_seed: u64,
    cell_seed: u64,
    cfg: ExperimentConfig,
}

fn build_jobs(cfg: &SweepConfig, master_seed: u64) -> Result<Vec<Job>> {
    let combos: usize = cfg.axes.iter().map(|a| a.values.len()).product();
    let mut jobs = Vec::with_capacity(combos * cfg.replicate_seeds.len());
    for combo in 0..combos {
        // Row-major odometer over axes: first axis slowest, last fastest.
        let mut coords = vec![0.0; cfg.axes.len()];
        let mut rem = combo;
        for (slot, axis) in coords.iter_mut().zip(&cfg.axes).rev() {
            *slot = axis.values[rem % axis.values.len()];
            rem /= axis.values.len();
        }
        let mut cell_cfg = cfg.base;
        for (axis, &v) in cfg.axes.iter().zip(&coords) {
            axis.param.apply(&mut cell_cfg, v)?;
        }
        for &rep_seed in &cfg.replicate_seeds {
            jobs.push(Job {
                coords: coords.clone(),
                rep_seed,
                cell_seed: seed::mix(master_seed, rep_seed),
                cfg: cell_cfg,
            });
        }
    }
    Ok(jobs)
}

fn sanitize_status(s: &str) -> String {
    s.chars()
        .map(|c| if c == ',' || c == '\n' || c == '\r' { ';' } else { c })
        .collect()
}

/// Run every cell of the sweep on a bounded worker pool. Cell failures are
/// recorded in their rows; the sweep always completes. Row order is fixed
/// by cell index (axes row-major, replicate seeds innermost) regardless of
/// worker count or completion order.
pub fn run_sweep(cfg: &SweepConfig, master_seed: u64, workers: usize) -> Result<Vec<SweepRow>> {
    let cfg = cfg.normalized();
    cfg.validate()?;
    let jobs = build_jobs(&cfg, master_seed)?;
    let n_jobs = jobs.len();
    let workers = workers.clamp(1, n_jobs.max(1));

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, SweepRow)>();
    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let jobs = &jobs;
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n_jobs {
                    break;
                }
                let job = &jobs[i];
                let (metrics, status) = match run_experiment(&job.cfg, job.cell_seed) {
                    Ok(result) => (Some(result.metrics), "ok".to_string()),
                    Err(e) => (None, sanitize_status(&e.to_string())),
                };
                let row = SweepRow {
                    coords: job.coords.clone(),
                    rep_seed: job.rep_seed,
                    cell_seed: job.cell_seed,
                    metrics,
                    status,
                };
                tx.send((i, row)).expect("collector outlives workers");
            });
        }
        drop(tx);
    });

    let mut slots: Vec<Option<SweepRow>> = vec![None; n_jobs];
    for (i, row) in rx {
        slots[i] = Some(row);
    }
    Ok(slots
        .into_iter()
        .map(|s| s.expect("every job reports exactly once"))
        .collect())
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render sweep rows as CSV: one column per axis (coordinate values), then
/// seeds, metrics at full precision, and a status column. Failed cells
/// leave their metric cells empty.
pub fn sweep_to_csv(cfg: &SweepConfig, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for axis in &cfg.axes {
        out.push_str(axis.param.name());
        out.push(',');
    }
    out.push_str(
        "rep_seed,cell_seed,acc_obs_a,acc_int_a,acc_obs_b,acc_int_b,rel_drop_a,rois_ab,status\n",
    );
    for row in rows {
        for c in &row.coords {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{},{},", row.rep_seed, row.cell_seed));
        match &row.metrics {
            Some(m) => {
                out.push_str(&fmt_metric(m.acc_obs_a));
                out.push(',');
                out.push_str(&fmt_metric(m.acc_int_a));
                out.push(',');
                out.push_str(&fmt_metric(m.acc_obs_b));
                out.push(',');
                out.push_str(&fmt_metric(m.acc_int_b));
                out.push(',');
                out.push_str(&fmt_metric(m.rel_drop_a));
                out.push(',');
                if let Some(r) = m.rois_ab {
                    out.push_str(&fmt_metric(r));
                }
                out.push(',');
            }
            None => out.push_str(",,,,,,"),
        }
        out.push_str(&row.status);
        out.push('\n');
    }
    out
}

/// Axis-aligned rectangle for decision-boundary grids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl GridBounds {
    /// Covers both generator families at their stock parameters.
    pub const DEFAULT: GridBounds = GridBounds {
        x1_min: -5.0,
        x1_max: 5.0,
        x2_min: -5.0,
        x2_max: 5.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x1_min", self.x1_min),
            ("x1_max", self.x1_max),
            ("x2_min", self.x2_min),
            ("x2_max", self.x2_max),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        if self.x1_min >= self.x1_max || self.x2_min >= self.x2_max {
            return Err(Error::InvalidParameter {
                name: "bounds",
                reason: "min must be strictly below max on both axes".into(),
            });
        }
        Ok(())
    }
}

/// One lattice point with both models' logits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x1: f64,
    pub x2: f64,
    pub logit_a: f64,
    pub logit_b: f64,
}

/// Evaluate both models' logits on an inclusive `resolution x resolution`
/// lattice over `bounds`. Rows scan x2 ascending in the outer loop and x1
/// ascending in the inner loop; the four rectangle edges are hit exactly.
pub fn decision_grid(
    model_a: &Mlp,
    model_b: &Mlp,
    bounds: &GridBounds,
    resolution: usize,
) -> Result<Vec<GridPoint>> {
    bounds.validate()?;
    if resolution < 2 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: format!("must be >= 2, got {resolution}"),
        });
    }
    model_a.validate()?;
    model_b.validate()?;
    let lerp = |lo: f64, hi: f64, i: usize| {
        let t = i as f64 / (resolution - 1) as f64;
        lo * (1.0 - t) + hi * t
    };
    let mut points = Vec::with_capacity(resolution * resolution);
    for i2 in 0..resolution {
        let x2 = lerp(bounds.x2_min, bounds.x2_max, i2);
        for i1 in 0..resolution {
            let x1 = lerp(bounds.x1_min, bounds.x1_max, i1);
            let x = [x1, x2];
            points.push(GridPoint {
                x1,
                x2,
                logit_a: model_a.logit(&x),
                logit_b: model_b.logit(&x),
            });
        }
    }
    Ok(points)
}

pub const GRID_CSV_HEADER: &str = "x1,x2,logit_a,logit_b";

/// Render a decision grid as CSV at full float precision.
pub fn grid_to_csv(points: &[GridPoint]) -> String {
    let mut out = String::with_capacity(points.len() * 80 + 32);
    out.push_str(GRID_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_metric(p.x1),
            fmt_metric(p.x2),
            fmt_metric(p.logit_a),
            fmt_metric(p.logit_b)
        ));
    }
    out
}
