//! Kernel dependence stack: RBF Gram matrices, the biased HSIC estimator,
//! its normalized form NHSIC, and the permutation-calibrated RoIS score.
//!
//! Conventions, fixed once here:
//!
//! * Kernel: RBF `K_ij = exp(-||x_i - x_j||^2 / (2 sigma^2))` with the
//!   bandwidth chosen per input by the median heuristic.
//! * Estimator: biased trace form `HSIC = tr(K H L H) / (n-1)^2` with the
//!   centering matrix `H = I - (1/n) 11^T`.
//! * `NHSIC(X, Y) = HSIC(X,Y) / sqrt(HSIC(X,X) * HSIC(Y,Y))`.
//! * `RoIS(F_a, F_b) = NHSIC(F_a, F_b) / (d* + delta)` where `d*` averages
//!   `NHSIC(F_a permuted, F_b)` over `m` uniform random row permutations of
//!   `F_a` only. A score near 1 means the measured dependence is at the
//!   level expected between independent samples.
//!
//! The permutation loop exploits two identities: centering commutes with
//! simultaneous row/column permutation (`H P K P^T H = P (H K H) P^T`), and
//! the self terms `HSIC(K^pi, K^pi) = HSIC(K, K)` are permutation-invariant.
//! Each permutation therefore costs one O(n^2) inner product against the
//! pre-centered matrix instead of a fresh Gram build; a test pins this fast
//! path to the naive permute-rows-then-NHSIC composition.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::FeatureMatrix;
use crate::seed;

/// Symmetric RBF kernel matrix with unit diagonal.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    data: Vec<f64>,
    n: usize,
    bandwidth: f64,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Median of the pairwise Euclidean distances over all distinct pairs.
/// Even pair counts take the mean of the two middle values. An all-zero
/// median (duplicate points) falls back to 1.0 so the kernel stays usable.
pub fn median_heuristic(x: &FeatureMatrix) -> Result<f64> {
    let n = x.n();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "median heuristic needs at least 2 points".into(),
        });
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(x.row(i), x.row(j)).sqrt();
            if !d.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "X",
                    reason: "non-finite feature values".into(),
                });
            }
            dists.push(d);
        }
    }
    dists.sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    Ok(if median == 0.0 { 1.0 } else { median })
}

/// Build the RBF Gram matrix for one sample set.
pub fn rbf_gram(x: &FeatureMatrix, bandwidth: f64) -> Result<GramMatrix> {
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "bandwidth",
            reason: format!("must be finite and > 0, got {bandwidth}"),
        });
    }
    let n = x.n();
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
        for j in i + 1..n {
            let k = (-sq_dist(x.row(i), x.row(j)) * inv).exp();
            data[i * n + j] = k;
            data[j * n + i] = k;
        }
    }
    Ok(GramMatrix { data, n, bandwidth })
}

/// `H K H` computed entrywise as `K_ij - rowmean_i - rowmean_j + grandmean`.
fn centered(k: &GramMatrix) -> Vec<f64> {
    let n = k.n;
    let mut row_means = vec![0.0; n];
    for (mean, row) in row_means.iter_mut().zip(k.data.chunks_exact(n)) {
        *mean = row.iter().sum::<f64>() / n as f64;
    }
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = k.data[i * n + j] - row_means[i] - row_means[j] + grand;
        }
    }
    out
}

fn frob_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

fn hsic_scale(n: usize) -> f64 {
    let m = (n - 1) as f64;
    1.0 / (m * m)
}

/// Biased HSIC estimate `tr(K H L H) / (n-1)^2`.
pub fn hsic(k: &GramMatrix, l: &GramMatrix) -> Result<f64> {
    if k.n != l.n {
        return Err(Error::ShapeMismatch(format!(
            "gram sizes differ: {} vs {}",
            k.n, l.n
        )));
    }
    if k.n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "HSIC needs at least 2 samples".into(),
        });
    }
    Ok(frob_dot(&centered(k), &l.data) * hsic_scale(k.n))
}

/// The three HSIC terms underlying NHSIC, computed from feature matrices
/// with per-input median-heuristic bandwidths.
struct NhsicParts {
    cross: f64,
    self_x: f64,
    self_y: f64,
    gram_y: GramMatrix,
    centered_x: Vec<f64>,
}

fn nhsic_parts(x: &FeatureMatrix, y: &FeatureMatrix) -> Result<NhsicParts> {
    if x.n() != y.n() {
        return Err(Error::ShapeMismatch(format!(
            "feature matrices disagree on n: {} vs {}",
            x.n(),
            y.n()
        )));
    }
    if x.n() < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "NHSIC needs at least 2 samples".into(),
        });
    }
    let gram_x = rbf_gram(x, median_heuristic(x)?)?;
    let gram_y = rbf_gram(y, median_heuristic(y)?)?;
    let scale = hsic_scale(x.n());
    let centered_x = centered(&gram_x);
    let centered_y = centered(&gram_y);
    Ok(NhsicParts {
        cross: frob_dot(&centered_x, &gram_y.data) * scale,
        self_x: frob_dot(&centered_x, &gram_x.data) * scale,
        self_y: frob_dot(&centered_y, &gram_y.data) * scale,
        gram_y,
        centered_x,
    })
}

fn normalizer(self_x: f64, self_y: f64) -> Result<f64> {
    let denom = (self_x * self_y).sqrt();
    if !denom.is_finite() || denom <= 0.0 {
        return Err(Error::DegenerateInput(
            "zero self-HSIC (constant features) makes NHSIC undefined".into(),
        ));
    }
    Ok(denom)
}

/// `NHSIC(X, Y) = HSIC(X,Y) / sqrt(HSIC(X,X) HSIC(Y,Y))`.
pub fn nhsic(x: &FeatureMatrix, y: &FeatureMatrix) -> Result<f64> {
    let p = nhsic_parts(x, y)?;
    Ok(p.cross / normalizer(p.self_x, p.self_y)?)
}

/// Permutation settings for [`rois`]. `m` permutations are drawn with
/// replacement, uniformly over all row orders, from a ChaCha8 stream seeded
/// with `perm_seed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoisConfig {
    pub m: usize,
    pub delta: f64,
    pub perm_seed: u64,
}

pub const DEFAULT_PERMUTATIONS: usize = 100;
pub const DEFAULT_DELTA: f64 = 1e-6;

impl RoisConfig {
    pub fn new(perm_seed: u64) -> Self {
        RoisConfig {
            m: DEFAULT_PERMUTATIONS,
            delta: DEFAULT_DELTA,
            perm_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "must be >= 1".into(),
            });
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("must be finite and >= 0, got {}", self.delta),
            });
        }
        Ok(())
    }
}

/// Everything a RoIS evaluation produced, in its JSON report shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub nhsic: f64,
    pub d_star: f64,
    pub delta: f64,
    pub m: usize,
    pub rois: f64,
    pub n: usize,
    pub perm_seed: u64,
}

fn smooth_ratio(numerator: f64, d_star: f64, delta: f64) -> f64 {
    numerator / (d_star + delta)
}

/// RoIS with its intermediate quantities. Permutations reorder the rows of
/// `f_a` only; `f_b` stays fixed.
pub fn rois_report(
    f_a: &FeatureMatrix,
    f_b: &FeatureMatrix,
    cfg: &RoisConfig,
) -> Result<DependenceReport> {
    cfg.validate()?;
    if f_a.n() != f_b.n() {
        return Err(Error::ShapeMismatch(format!(
            "feature matrices disagree on n: {} vs {}",
            f_a.n(),
            f_b.n()
        )));
    }
    let n = f_a.n();
    if n < 3 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "RoIS needs at least 3 samples".into(),
        });
    }
    let parts = nhsic_parts(f_a, f_b)?;
    let denom = normalizer(parts.self_x, parts.self_y)?;
    let nhsic_ab = parts.cross / denom;

    // Permuting F_a's rows permutes its Gram symmetrically, its centered
    // Gram likewise, and leaves HSIC(K_a, K_a) unchanged; so each permuted
    // NHSIC is an inner product of the pre-centered K_a against K_b.
    let scale = hsic_scale(n);
    let mut rng = seed::rng_from(cfg.perm_seed);
    let mut sum = 0.0;
    for _ in 0..cfg.m {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut acc = 0.0;
        for i in 0..n {
            let ca_row = &parts.centered_x[perm[i] * n..perm[i] * n + n];
            let kb_row = &parts.gram_y.entries()[i * n..i * n + n];
            for j in 0..n {
                acc += ca_row[perm[j]] * kb_row[j];
            }
        }
        sum += acc * scale / denom;
    }
    let d_star = sum / cfg.m as f64;

    Ok(DependenceReport {
        nhsic: nhsic_ab,
        d_star,
        delta: cfg.delta,
        m: cfg.m,
        rois: smooth_ratio(nhsic_ab, d_star, cfg.delta),
        n,
        perm_seed: cfg.perm_seed,
    })
}

/// The RoIS score alone.
pub fn rois(f_a: &FeatureMatrix, f_b: &FeatureMatrix, cfg: &RoisConfig) -> Result<f64> {
    Ok(rois_report(f_a, f_b, cfg)?.rois)
}
