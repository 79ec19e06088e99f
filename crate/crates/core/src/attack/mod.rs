//! `l_inf` PGD, PGD-approximated robust loss, and adversarial training.

mod train;

pub use train::{adversarial_train, standard_train, EpochRecord, TrainLog, TrainSchedule};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::Dataset;
use crate::network::{argmax_rows, cross_entropy_per_sample, NetworkSpec, ParamSet};
use crate::numerics::{derive_seed, Rng, Tensor};

/// Batch size used when a dataset is evaluated in chunks.
pub const EVAL_BATCH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub eps_x: f64,
    pub step_size: f64,
    pub steps: usize,
    pub rand_init: bool,
    pub input_bounds: (f64, f64),
}

impl Default for AttackConfig {
    /// PGD-10 at `eps = 8/255` with step `eps/4` and a random start.
    fn default() -> Self {
        Self::pgd(8.0 / 255.0, 10)
    }
}

impl AttackConfig {
    pub fn pgd(eps_x: f64, steps: usize) -> Self {
        Self {
            eps_x,
            step_size: eps_x / 4.0,
            steps,
            rand_init: true,
            input_bounds: (0.0, 1.0),
        }
    }

    /// No perturbation at all.
    pub fn none() -> Self {
        Self {
            eps_x: 0.0,
            step_size: 0.0,
            steps: 0,
            rand_init: false,
            input_bounds: (0.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_x >= 0.0) {
            return Err(Error::InvalidConfig(format!("eps_x must be >= 0, got {}", self.eps_x)));
        }
        if self.steps > 0 && !(self.step_size > 0.0) {
            return Err(Error::InvalidConfig("step_size must be > 0 when steps > 0".into()));
        }
        if self.input_bounds.0 > self.input_bounds.1 {
            return Err(Error::InvalidInterval {
                lo: self.input_bounds.0,
                hi: self.input_bounds.1,
            });
        }
        Ok(())
    }
}

/// Result of attacking one batch.
#[derive(Debug, Clone)]
pub struct PgdOutcome {
    /// Per-sample iterate of maximal loss.
    pub adversarial: Tensor,
    pub losses: Vec<f64>,
    pub predictions: Vec<usize>,
}

/// Projected gradient ascent on the inputs inside the `l_inf` ball, returning
/// each sample's best-loss iterate.
pub fn pgd_attack(
    spec: &NetworkSpec,
    params: &ParamSet,
    batch: &Tensor,
    labels: &[usize],
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> Result<Tensor> {
    Ok(pgd_attack_detailed(spec, params, batch, labels, cfg, rng)?.adversarial)
}

pub fn pgd_attack_detailed(
    spec: &NetworkSpec,
    params: &ParamSet,
    batch: &Tensor,
    labels: &[usize],
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> Result<PgdOutcome> {
    cfg.validate()?;
    let (lo, hi) = cfg.input_bounds;
    let eps = cfg.eps_x;
    let n = labels.len();
    let d = batch.len() / n.max(1);
    let clean = batch.data();

    let mut adv = batch.clone();
    if cfg.rand_init {
        for (a, &x) in adv.data_mut().iter_mut().zip(clean) {
            *a = (x + rng.uniform_range(-eps, eps)).clamp(lo, hi);
        }
    }

    let mut best = adv.clone();
    let mut best_loss = vec![f64::NEG_INFINITY; n];
    let mut best_logits = vec![0.0; n * spec.num_classes()];
    let k = spec.num_classes();
    for step in 0..=cfg.steps {
        let (losses, logits, grad) = if step < cfg.steps {
            let bw = spec.backward(params, &adv, labels)?;
            (bw.sample_losses, bw.logits, Some(bw.input_grad))
        } else {
            let logits = spec.forward(params, &adv)?;
            (cross_entropy_per_sample(&logits, labels)?, logits, None)
        };
        for b in 0..n {
            if losses[b] > best_loss[b] {
                best_loss[b] = losses[b];
                best.data_mut()[b * d..(b + 1) * d].copy_from_slice(&adv.data()[b * d..(b + 1) * d]);
                best_logits[b * k..(b + 1) * k].copy_from_slice(&logits.data()[b * k..(b + 1) * k]);
            }
        }
        let Some(grad) = grad else { break };
        for ((a, &g), &x) in adv.data_mut().iter_mut().zip(grad.data()).zip(clean) {
            let stepped = *a + cfg.step_size * sign(g);
            *a = stepped.clamp(x - eps, x + eps).clamp(lo, hi);
        }
    }
    let predictions = argmax_rows(&Tensor::from_parts_unchecked(vec![n, k], best_logits));
    Ok(PgdOutcome {
        adversarial: best,
        losses: best_loss,
        predictions,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-batch attack results over a dataset, attacked in fixed-size chunks.
/// Chunk `i` draws its random start from `derive_seed(seed, i)`, so the output
/// does not depend on evaluation order.
pub fn attack_dataset(
    spec: &NetworkSpec,
    params: &ParamSet,
    ds: &Dataset,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<Vec<(PgdOutcome, Vec<usize>)>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ds.batches(EVAL_BATCH)
        .into_par_iter()
        .enumerate()
        .map(|(i, (x, y))| {
            let mut rng = Rng::new(derive_seed(seed, i as u64));
            let out = pgd_attack_detailed(spec, params, &x, &y, cfg, &mut rng)?;
            Ok((out, y))
        })
        .collect()
}

/// Mean over the dataset of the per-sample PGD-approximated worst-case loss.
pub fn robust_loss(
    spec: &NetworkSpec,
    params: &ParamSet,
    ds: &Dataset,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<f64> {
    let results = attack_dataset(spec, params, ds, cfg, seed)?;
    let total: f64 = results.iter().flat_map(|(o, _)| o.losses.iter()).sum();
    Ok(total / ds.len() as f64)
}

/// Mean clean cross-entropy.
pub fn clean_loss(spec: &NetworkSpec, params: &ParamSet, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_batch: Vec<f64> = ds
        .batches(EVAL_BATCH)
        .into_par_iter()
        .map(|(x, y)| {
            let logits = spec.forward(params, &x)?;
            Ok(cross_entropy_per_sample(&logits, &y)?.iter().sum())
        })
        .collect::<Result<_>>()?;
    Ok(per_batch.iter().sum::<f64>() / ds.len() as f64)
}

/// Clean predictions for every sample in storage order.
pub fn predict(spec: &NetworkSpec, params: &ParamSet, ds: &Dataset) -> Result<Vec<usize>> {
    let per_batch: Vec<Vec<usize>> = ds
        .batches(EVAL_BATCH)
        .into_par_iter()
        .map(|(x, _)| Ok(argmax_rows(&spec.forward(params, &x)?)))
        .collect::<Result<_>>()?;
    Ok(per_batch.into_iter().flatten().collect())
}

/// Percentage of samples classified correctly both clean and at their
/// best-loss adversarial iterate.
pub fn adversarial_accuracy(
    spec: &NetworkSpec,
    params: &ParamSet,
    ds: &Dataset,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<f64> {
    let clean = predict(spec, params, ds)?;
    let results = attack_dataset(spec, params, ds, cfg, seed)?;
    let adv_preds = results.iter().flat_map(|(o, _)| o.predictions.iter());
    let correct = clean
        .iter()
        .zip(adv_preds)
        .zip(ds.labels())
        .filter(|((c, a), y)| *c == *y && *a == *y)
        .count();
    Ok(100.0 * correct as f64 / ds.len() as f64)
}
