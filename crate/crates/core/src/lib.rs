//! Robust-training laboratory for small networks.
//!
//! The crate covers the full loop: adversarial training with an `l_inf` PGD
//! attack, module robust criticality (the loss increase caused by the worst
//! weight perturbation of one layer inside an L2 ball proportional to the
//! layer's norm), and robust critical fine-tuning, which fine-tunes the least
//! critical layer on clean data and interpolates back toward the adversarially
//! trained weights.
//!
//! Modules:
//! - [`numerics`]: tensors, seeded RNG, projections.
//! - [`network`]: layers, forward/backward, freezing, SGD.
//! - [`attack`]: PGD, robust loss, adversarial training.
//! - [`mrc`]: module robust criticality scans and selection.
//! - [`rift`]: fine-tuning, interpolation and the end-to-end pipeline.
//! - [`harness`]: datasets, corruptions, metrics, checkpoints, run config.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod error;
pub mod harness;
pub mod mrc;
pub mod network;
pub mod numerics;
pub mod rift;

pub use error::{Error, Result};
pub use network::{FreezeMask, GradSet, LayerKind, LayerParams, LayerSpec, NetworkSpec, ParamSet};
pub use numerics::{Rng, Tensor};
