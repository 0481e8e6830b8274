//! Benchmark toolkit for studying spurious correlations under distribution
//! shift on synthetic 2-D tasks.
//!
//! The pipeline has four stages, one module each:
//!
//! * [`scm`] — structural causal model generators (Circles, Windmill) that
//!   emit labelled point clouds under an observational regime (`B = A`) and
//!   an interventional regime (`B` drawn independently of `A`).
//! * [`nn`] — a small fully-connected ReLU network with manual
//!   backpropagation; its penultimate activations are the learned features.
//! * [`training`] — the two ERM batching schemes (mixed batches vs
//!   regime-pure batches) and the SGD train loop.
//! * [`dependence`] — RBF Gram matrices, the biased HSIC estimator, NHSIC,
//!   and the permutation-calibrated RoIS score.
//!
//! [`harness`] ties the stages into reproducible experiment cells and sweep
//! grids, and [`seed`] provides the deterministic stream derivation that
//! makes every output byte-stable under a fixed seed.

pub mod dependence;
pub mod error;
pub mod harness;
pub mod nn;
pub mod scm;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
