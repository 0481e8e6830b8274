//! Minimal fully-connected ReLU network with manual backpropagation.
//!
//! The architecture is fixed-shape: 2 inputs, `hidden_depth` hidden layers
//! of `hidden_width` units each, one output logit. The class prediction is
//! `logit > 0`, the loss is binary cross-entropy with logits, and the
//! penultimate activations (input to the output layer) are the learned
//! feature representation handed to the dependence metrics.
//!
//! Everything runs in double precision; the metric stack downstream is
//! sensitive to rounding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::Sample;
use crate::seed;

/// Input dimension of every network part of this crate.
pub const INPUT_DIM: usize = 2;

/// Architecture knob pair. Depth counts hidden layers; the output layer is
/// always a single logit on top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    pub hidden_depth: usize,
    pub hidden_width: usize,
}

impl MlpArch {
    pub fn new(hidden_depth: usize, hidden_width: usize) -> Self {
        MlpArch {
            hidden_depth,
            hidden_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_depth < 1 {
            return Err(Error::InvalidParameter {
                name: "hidden_depth",
                reason: "must be >= 1".into(),
            });
        }
        if self.hidden_width < 1 {
            return Err(Error::InvalidParameter {
                name: "hidden_width",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// `(in_dim, out_dim)` of every layer from input to logit.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let w = self.hidden_width;
        let mut dims = Vec::with_capacity(self.hidden_depth + 1);
        dims.push((INPUT_DIM, w));
        for _ in 1..self.hidden_depth {
            dims.push((w, w));
        }
        dims.push((w, 1));
        dims
    }
}

/// One affine layer. `weights` is row-major `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// The network. A plain value: cloning gives an independent model, so
/// frozen models are freely shareable across threads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: MlpArch,
    pub init_seed: u64,
    pub layers: Vec<DenseLayer>,
}

/// Fresh network: weights uniform on `(-s, s)` with
/// `s = sqrt(6 / (fan_in + fan_out))` per layer, biases zero. Weights are
/// drawn layer by layer in row-major order, so the stream layout is part of
/// the determinism contract.
pub fn init_mlp(arch: &MlpArch, init_seed: u64) -> Result<Mlp> {
    arch.validate()?;
    let mut rng = seed::rng_from(init_seed);
    let layers = arch
        .layer_dims()
        .into_iter()
        .map(|(in_dim, out_dim)| {
            let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
            let weights = (0..in_dim * out_dim)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * s)
                .collect();
            DenseLayer {
                in_dim,
                out_dim,
                weights,
                biases: vec![0.0; out_dim],
            }
        })
        .collect();
    Ok(Mlp {
        arch: *arch,
        init_seed,
        layers,
    })
}

impl Mlp {
    /// Forward pass: returns the logit and the penultimate activations
    /// (the input to the output layer). With a single affine layer the
    /// features are the raw input.
    pub fn forward(&self, x: &[f64; INPUT_DIM]) -> (f64, Vec<f64>) {
        let mut cur: Vec<f64> = x.to_vec();
        let n_layers = self.layers.len();
        for (li, layer) in self.layers.iter().enumerate() {
            let last = li + 1 == n_layers;
            if last {
                let mut z = layer.biases[0];
                for (w, c) in layer.weights.iter().zip(&cur) {
                    z += w * c;
                }
                return (z, cur);
            }
            let mut next = vec![0.0; layer.out_dim];
            for ((slot, &bias), row) in next
                .iter_mut()
                .zip(&layer.biases)
                .zip(layer.weights.chunks_exact(layer.in_dim))
            {
                let mut z = bias;
                for (w, c) in row.iter().zip(&cur) {
                    z += w * c;
                }
                *slot = z.max(0.0);
            }
            cur = next;
        }
        unreachable!("an Mlp always has an output layer")
    }

    pub fn logit(&self, x: &[f64; INPUT_DIM]) -> f64 {
        self.forward(x).0
    }

    /// Shape-chain consistency: input dim through hidden layers to 1 logit,
    /// with weight/bias lengths matching and all parameters finite. Called
    /// on checkpoint load.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let dims = self.arch.layer_dims();
        if dims.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} layers for arch, found {}",
                dims.len(),
                self.layers.len()
            )));
        }
        for (li, (layer, (in_dim, out_dim))) in self.layers.iter().zip(dims).enumerate() {
            if layer.in_dim != in_dim || layer.out_dim != out_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {li}: expected {in_dim}x{out_dim}, found {}x{}",
                    layer.in_dim, layer.out_dim
                )));
            }
            if layer.weights.len() != in_dim * out_dim || layer.biases.len() != out_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {li}: weight/bias array lengths do not match dims"
                )));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "weights",
                    reason: format!("layer {li} contains non-finite parameters"),
                });
            }
        }
        Ok(())
    }

    /// Checkpoint serialization: arch, init seed, and row-major parameter
    /// arrays. JSON floats round-trip f64 exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("Mlp serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Mlp> {
        let mlp: Mlp = serde_json::from_str(text)?;
        mlp.validate()?;
        Ok(mlp)
    }

    /// Smallest |pre-activation| over all hidden units and samples.
    /// Diagnostic for finite-difference gradient checks: a pre-activation
    /// near the ReLU kink makes numeric differentiation disagree with
    /// backprop for legitimate reasons.
    pub fn min_abs_preactivation(&self, xs: &[[f64; INPUT_DIM]]) -> f64 {
        let mut min_abs = f64::INFINITY;
        for x in xs {
            let mut cur: Vec<f64> = x.to_vec();
            let n_layers = self.layers.len();
            for (li, layer) in self.layers.iter().enumerate() {
                if li + 1 == n_layers {
                    break;
                }
                let mut next = vec![0.0; layer.out_dim];
                for ((slot, &bias), row) in next
                    .iter_mut()
                    .zip(&layer.biases)
                    .zip(layer.weights.chunks_exact(layer.in_dim))
                {
                    let mut z = bias;
                    for (w, c) in row.iter().zip(&cur) {
                        z += w * c;
                    }
                    min_abs = min_abs.min(z.abs());
                    *slot = z.max(0.0);
                }
                cur = next;
            }
        }
        min_abs
    }
}

/// Parameter gradients, mirroring [`Mlp`] layer shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Grads {
            weights: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }
}

/// Numerically stable binary cross-entropy with logits:
/// `max(z, 0) - z*y + ln(1 + exp(-|z|))`.
pub fn bce_with_logits(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean BCE loss over the batch and its exact parameter gradient via
/// backpropagation. ReLU uses subgradient 0 at the kink.
pub fn loss_and_grad(mlp: &Mlp, xs: &[[f64; INPUT_DIM]], targets: &[f64]) -> Result<(f64, Grads)> {
    if xs.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    if xs.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} inputs vs {} targets",
            xs.len(),
            targets.len()
        )));
    }
    let n_layers = mlp.layers.len();
    let mut grads = Grads::zeros_like(mlp);
    // Post-activation and delta buffers, one per layer, reused across samples.
    let mut acts: Vec<Vec<f64>> = mlp.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
    let mut deltas: Vec<Vec<f64>> = mlp.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
    let inv = 1.0 / xs.len() as f64;
    let mut loss = 0.0;

    for (x, &t) in xs.iter().zip(targets) {
        for li in 0..n_layers {
            let (done, rest) = acts.split_at_mut(li);
            let input: &[f64] = if li == 0 { x } else { &done[li - 1] };
            let layer = &mlp.layers[li];
            let out = &mut rest[0];
            let last = li + 1 == n_layers;
            for ((slot, &bias), row) in out
                .iter_mut()
                .zip(&layer.biases)
                .zip(layer.weights.chunks_exact(layer.in_dim))
            {
                let mut z = bias;
                for (w, v) in row.iter().zip(input) {
                    z += w * v;
                }
                *slot = if last { z } else { z.max(0.0) };
            }
        }
        let logit = acts[n_layers - 1][0];
        loss += bce_with_logits(logit, t) * inv;

        deltas[n_layers - 1][0] = (sigmoid(logit) - t) * inv;
        for li in (0..n_layers).rev() {
            let layer = &mlp.layers[li];
            let input: &[f64] = if li == 0 { x } else { &acts[li - 1] };
            for (o, &d) in deltas[li].iter().enumerate() {
                if d != 0.0 {
                    let grow = &mut grads.weights[li][o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (g, v) in grow.iter_mut().zip(input) {
                        *g += d * v;
                    }
                    grads.biases[li][o] += d;
                }
            }
            if li > 0 {
                let (dprev, dcur) = deltas.split_at_mut(li);
                let dprev = &mut dprev[li - 1];
                let dcur = &dcur[0];
                for i in 0..layer.in_dim {
                    let mut s = 0.0;
                    for (o, &d) in dcur.iter().enumerate() {
                        s += layer.weights[o * layer.in_dim + i] * d;
                    }
                    // acts holds post-ReLU values, so > 0 identifies the
                    // active side of the kink exactly.
                    dprev[i] = if acts[li - 1][i] > 0.0 { s } else { 0.0 };
                }
            }
        }
    }
    Ok((loss, grads))
}

/// In-place SGD update `theta <- theta - lr * grad`. `lr = 0` is the
/// identity; callers that train enforce `lr > 0` at config level.
pub fn sgd_step(mlp: &mut Mlp, grads: &Grads, lr: f64) -> Result<()> {
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::InvalidParameter {
            name: "lr",
            reason: format!("must be finite and >= 0, got {lr}"),
        });
    }
    if grads.weights.len() != mlp.layers.len() || grads.biases.len() != mlp.layers.len() {
        return Err(Error::ShapeMismatch("grads do not match model layers".into()));
    }
    for (li, layer) in mlp.layers.iter_mut().enumerate() {
        let gw = &grads.weights[li];
        let gb = &grads.biases[li];
        if gw.len() != layer.weights.len() || gb.len() != layer.biases.len() {
            return Err(Error::ShapeMismatch(format!(
                "grads for layer {li} do not match its shape"
            )));
        }
        for (w, g) in layer.weights.iter_mut().zip(gw) {
            *w -= lr * g;
        }
        for (b, g) in layer.biases.iter_mut().zip(gb) {
            *b -= lr * g;
        }
    }
    Ok(())
}

/// Which label a model predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    A,
    B,
}

impl Target {
    pub fn label_of(self, s: &Sample) -> f64 {
        match self {
            Target::A => s.labels.a as f64,
            Target::B => s.labels.b as f64,
        }
    }
}

/// Fraction of samples where `logit > 0` matches the target label.
pub fn accuracy(mlp: &Mlp, samples: &[Sample], target: Target) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::DegenerateInput("empty sample set".into()));
    }
    let hits = samples
        .iter()
        .filter(|s| (mlp.logit(&s.x) > 0.0) as u8 as f64 == target.label_of(s))
        .count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Row-major `n x dim` matrix of per-sample feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n: usize,
    dim: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, n: usize, dim: usize) -> Result<Self> {
        if dim == 0 || data.len() != n * dim {
            return Err(Error::ShapeMismatch(format!(
                "cannot view {} values as {n} rows of dim {dim}",
                data.len()
            )));
        }
        Ok(FeatureMatrix { data, n, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        Ok(FeatureMatrix {
            data: rows.concat(),
            n: rows.len(),
            dim,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Penultimate activations of every input, as one matrix.
pub fn features(mlp: &Mlp, xs: &[[f64; INPUT_DIM]]) -> FeatureMatrix {
    let dim = mlp.layers.last().map_or(INPUT_DIM, |l| l.in_dim);
    let mut data = Vec::with_capacity(xs.len() * dim);
    for x in xs {
        let (_, f) = mlp.forward(x);
        data.extend_from_slice(&f);
    }
    FeatureMatrix {
        data,
        n: xs.len(),
        dim,
    }
}
