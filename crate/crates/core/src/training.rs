//! Batching schemes and the SGD train loop.
//!
//! Two schemes differ only in how an epoch is cut into batches:
//!
//! * **ERM** — one global shuffle, contiguous chunks; observational and
//!   interventional samples mix freely inside a batch.
//! * **ERM-Resampled** — the two regimes are pooled separately, each pool
//!   is shuffled and chunked on its own, and the resulting regime-pure
//!   batches are interleaved proportionally to pool size.
//!
//! Each call trains two models of identical architecture: one predicting
//! label `a`, one predicting label `b`. Their init streams are derived from
//! the run seed with fixed tags, and batch shuffling has its own stream, so
//! a `(dataset, config, seed)` triple reproduces the final weights exactly.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{init_mlp, loss_and_grad, sgd_step, Mlp, MlpArch};
use crate::scm::{Dataset, RegimeKind};
use crate::seed::{self, tag};

/// Batching scheme. Serialized as `"erm"` / `"erm_resampled"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Erm,
    ErmResampled,
}

/// Hyperparameters of one training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub scheme: Scheme,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lr",
                reason: format!("must be finite and > 0, got {}", self.lr),
            });
        }
        if self.epochs < 1 {
            return Err(Error::InvalidParameter {
                name: "epochs",
                reason: "must be >= 1".into(),
            });
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Mean training loss of each head for one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub loss_a: f64,
    pub loss_b: f64,
}

/// Result of [`train`]: both heads, the per-epoch loss history, and an echo
/// of the config that produced them.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub model_a: Mlp,
    pub model_b: Mlp,
    pub history: Vec<EpochLoss>,
    pub config: TrainConfig,
    /// SGD steps taken per model: epochs * ceil(n / batch_size).
    pub steps_per_model: usize,
}

fn chunk(indices: Vec<usize>, batch_size: usize) -> Vec<Vec<usize>> {
    indices.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Mixed-regime batches: one global shuffle, contiguous chunks, last chunk
/// possibly short. Returned batches index into `data.samples`.
pub fn make_batches_erm(
    data: &Dataset,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if data.samples.is_empty() {
        return Err(Error::DegenerateInput("empty dataset".into()));
    }
    if batch_size < 1 {
        return Err(Error::InvalidParameter {
            name: "batch_size",
            reason: "must be >= 1".into(),
        });
    }
    let mut indices: Vec<usize> = (0..data.samples.len()).collect();
    indices.shuffle(rng);
    Ok(chunk(indices, batch_size))
}

/// Regime-pure batches: each regime pool is shuffled and chunked
/// independently (observational pool consumes the stream first), then the
/// two batch lists are merged so that batch `j` of a `k`-batch pool lands
/// at relative position `(j + 0.5) / k` — a largest-remainder interleave.
/// Ties put the observational batch first. A dataset with a single regime
/// degrades to plain single-pool batching.
pub fn make_batches_resampled(
    data: &Dataset,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if data.samples.is_empty() {
        return Err(Error::DegenerateInput("empty dataset".into()));
    }
    if batch_size < 1 {
        return Err(Error::InvalidParameter {
            name: "batch_size",
            reason: "must be >= 1".into(),
        });
    }
    let mut obs: Vec<usize> = Vec::new();
    let mut int: Vec<usize> = Vec::new();
    for (i, s) in data.samples.iter().enumerate() {
        match s.regime {
            RegimeKind::Observational => obs.push(i),
            RegimeKind::Interventional => int.push(i),
        }
    }
    obs.shuffle(rng);
    int.shuffle(rng);
    let mut obs_batches = chunk(obs, batch_size);
    let mut int_batches = chunk(int, batch_size);
    let n_obs_batches = obs_batches.len();
    let n_int_batches = int_batches.len();

    let key = |j: usize, k: usize| (j as f64 + 0.5) / k as f64;
    let mut merged = Vec::with_capacity(n_obs_batches + n_int_batches);
    let (mut i, mut j) = (0, 0);
    while i < n_obs_batches || j < n_int_batches {
        let take_obs = if i >= n_obs_batches {
            false
        } else if j >= n_int_batches {
            true
        } else {
            key(i, n_obs_batches) <= key(j, n_int_batches)
        };
        if take_obs {
            merged.push(std::mem::take(&mut obs_batches[i]));
            i += 1;
        } else {
            merged.push(std::mem::take(&mut int_batches[j]));
            j += 1;
        }
    }
    Ok(merged)
}

/// Train an A-head and a B-head of identical architecture on `data`.
/// Init seeds are `mix(seed, INIT_A)` / `mix(seed, INIT_B)`; batch
/// shuffling runs on `cfg.shuffle_seed`. Aborts with a diagnostic when
/// either head's batch loss stops being finite.
pub fn train(data: &Dataset, arch: &MlpArch, cfg: &TrainConfig, seed: u64) -> Result<TrainedRun> {
    cfg.validate()?;
    arch.validate()?;
    if data.samples.is_empty() {
        return Err(Error::DegenerateInput("empty training set".into()));
    }
    let mut model_a = init_mlp(arch, seed::mix(seed, tag::INIT_A))?;
    let mut model_b = init_mlp(arch, seed::mix(seed, tag::INIT_B))?;
    let mut shuffle_rng = seed::rng_from(cfg.shuffle_seed);
    let n = data.samples.len() as f64;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut steps_per_model = 0;

    for epoch in 0..cfg.epochs {
        let batches = match cfg.scheme {
            Scheme::Erm => make_batches_erm(data, cfg.batch_size, &mut shuffle_rng)?,
            Scheme::ErmResampled => make_batches_resampled(data, cfg.batch_size, &mut shuffle_rng)?,
        };
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        for batch in &batches {
            let xs: Vec<[f64; 2]> = batch.iter().map(|&i| data.samples[i].x).collect();
            let ta: Vec<f64> = batch.iter().map(|&i| data.samples[i].labels.a as f64).collect();
            let tb: Vec<f64> = batch.iter().map(|&i| data.samples[i].labels.b as f64).collect();

            let (loss_a, grads_a) = loss_and_grad(&model_a, &xs, &ta)?;
            if !loss_a.is_finite() {
                return Err(Error::TrainingAborted {
                    epoch,
                    lr: cfg.lr,
                    head: "A",
                });
            }
            sgd_step(&mut model_a, &grads_a, cfg.lr)?;

            let (loss_b, grads_b) = loss_and_grad(&model_b, &xs, &tb)?;
            if !loss_b.is_finite() {
                return Err(Error::TrainingAborted {
                    epoch,
                    lr: cfg.lr,
                    head: "B",
                });
            }
            sgd_step(&mut model_b, &grads_b, cfg.lr)?;

            sum_a += loss_a * batch.len() as f64;
            sum_b += loss_b * batch.len() as f64;
            steps_per_model += 1;
        }
        history.push(EpochLoss {
            loss_a: sum_a / n,
            loss_b: sum_b / n,
        });
    }

    Ok(TrainedRun {
        model_a,
        model_b,
        history,
        config: *cfg,
        steps_per_model,
    })
}
