//! Module robust criticality (MRC).
//!
//! The MRC of a module is the largest increase of the robust loss obtainable by
//! perturbing only that module's weights inside the L2 ball of radius
//! `eps_w * ||theta_module||`. It is estimated with the inputs' adversarial
//! perturbations held fixed: the adversarial set is generated once against
//! the trained weights, then the module is pushed uphill by per-batch gradient
//! ascent, with the constraint checked after each epoch.

mod report;
mod scale;

pub use report::{MrcRecord, MrcReport};
pub use scale::scale_network;

use rayon::prelude::*;

use crate::attack::{attack_dataset, AttackConfig};
use crate::error::{Error, Result};
use crate::harness::Dataset;
use crate::network::{argmax_rows, cross_entropy_per_sample, NetworkSpec, ParamSet};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrcConfig {
    /// Perturbation radius relative to the module's L2 norm.
    pub eps_w: f64,
    /// Ascent epochs over the adversarial set.
    pub steps: usize,
    /// Ascent learning rate.
    pub gamma: f64,
    pub batch_size: usize,
    /// Keep ascending after a projection instead of stopping at the first
    /// constraint violation.
    pub project_and_continue: bool,
    /// Attack used to build the fixed adversarial set.
    pub attack: AttackConfig,
}

impl Default for MrcConfig {
    fn default() -> Self {
        Self {
            eps_w: 0.1,
            steps: 10,
            gamma: 1.0,
            batch_size: 128,
            project_and_continue: false,
            attack: AttackConfig::default(),
        }
    }
}

impl MrcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_w >= 0.0) {
            return Err(Error::InvalidConfig(format!("eps_w must be >= 0, got {}", self.eps_w)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        self.attack.validate()
    }
}

/// Adversarial examples generated once against fixed weights. Read-only.
#[derive(Debug, Clone)]
pub struct AdvDataset {
    data: Dataset,
}

impl AdvDataset {
    /// Wraps an already-perturbed dataset.
    pub fn from_dataset(data: Dataset) -> Self {
        Self { data }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// One PGD iterate per clean sample, computed against `params`.
pub fn build_adv_set(
    spec: &NetworkSpec,
    params: &ParamSet,
    data: &Dataset,
    attack: &AttackConfig,
    seed: u64,
) -> Result<AdvDataset> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results = attack_dataset(spec, params, data, attack, seed)?;
    let mut inputs = Vec::with_capacity(data.inputs().len());
    for (out, _) in &results {
        inputs.extend_from_slice(out.adversarial.data());
    }
    let inputs = Tensor::new(data.inputs().shape().to_vec(), inputs)?;
    Ok(AdvDataset { data: data.with_inputs(inputs)? })
}

/// Outcome of the ascent for one module.
#[derive(Debug, Clone)]
pub struct ModuleMrc {
    /// Best-iterate loss minus the unperturbed loss; never negative.
    pub value: f64,
    /// `theta` with only the module replaced by its best iterate.
    pub perturbed: ParamSet,
    pub base_loss: f64,
    /// Ascent epochs actually run.
    pub epochs_run: usize,
    /// Whether the ascent stopped at a projection.
    pub terminated_early: bool,
    /// Forward-backward work in full-network passes over the adversarial set:
    /// every epoch runs only the layers from the module onward, weighted by
    /// the fraction of modules they contain.
    pub forward_backward_count: f64,
}

/// Activations entering one layer, cached per batch.
struct CachedInputs {
    start: usize,
    batches: Vec<(Tensor, Vec<usize>)>,
    total: usize,
}

impl CachedInputs {
    fn new(spec: &NetworkSpec, params: &ParamSet, adv: &AdvDataset, start: usize, batch: usize) -> Result<Self> {
        let batches = adv
            .dataset()
            .batches(batch)
            .into_iter()
            .map(|(x, y)| Ok((spec.activation_at(params, &x, start)?, y)))
            .collect::<Result<_>>()?;
        Ok(Self { start, batches, total: adv.len() })
    }

    fn mean_loss(&self, spec: &NetworkSpec, params: &ParamSet) -> Result<f64> {
        let mut sum = 0.0;
        for (act, y) in &self.batches {
            let logits = spec.forward_from(params, self.start, act)?;
            sum += cross_entropy_per_sample(&logits, y)?.iter().sum::<f64>();
        }
        Ok(sum / self.total as f64)
    }

    fn accuracy(&self, spec: &NetworkSpec, params: &ParamSet) -> Result<f64> {
        let mut correct = 0;
        for (act, y) in &self.batches {
            let preds = argmax_rows(&spec.forward_from(params, self.start, act)?);
            correct += preds.iter().zip(y).filter(|(p, l)| p == l).count();
        }
        Ok(100.0 * correct as f64 / self.total as f64)
    }
}

/// Estimates the MRC of `module` by projected gradient ascent on the fixed
/// adversarial set.
pub fn mrc_of_module(
    spec: &NetworkSpec,
    theta: &ParamSet,
    module: &str,
    adv: &AdvDataset,
    cfg: &MrcConfig,
) -> Result<ModuleMrc> {
    Ok(run_module(spec, theta, module, adv, cfg)?.0)
}

fn run_module(
    spec: &NetworkSpec,
    theta: &ParamSet,
    module: &str,
    adv: &AdvDataset,
    cfg: &MrcConfig,
) -> Result<(ModuleMrc, CachedInputs)> {
    cfg.validate()?;
    if adv.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let start = spec.module_index(module)?;
    let cache = CachedInputs::new(spec, theta, adv, start, cfg.batch_size)?;
    let base_loss = cache.mean_loss(spec, theta)?;

    let origin = theta.module(module)?.flatten();
    let radius = cfg.eps_w * origin.l2_norm()?;
    let position = spec.module_names().iter().position(|&n| n == module).unwrap();
    let depth_fraction = (spec.module_count() - position) as f64 / spec.module_count() as f64;

    let mut current = theta.clone();
    let mut best = theta.clone();
    let mut best_loss = base_loss;
    let mut epochs_run = 0;
    let mut terminated_early = false;
    let mut cost = 0.0;

    for _ in 0..cfg.steps {
        epochs_run += 1;
        for (act, y) in &cache.batches {
            let bw = spec.backward_from(&current, start, act, y)?;
            let grad = bw.grads.module(module)?.flatten();
            let mut flat = current.module(module)?.flatten().into_data();
            for (w, g) in flat.iter_mut().zip(grad.data()) {
                *w += cfg.gamma * g;
            }
            current.module_mut(module)?.assign_flat(&flat)?;
            cost += depth_fraction * y.len() as f64 / cache.total as f64;
        }
        let delta = current.module(module)?.flatten().sub(&origin)?;
        let violated = delta.l2_norm()? > radius;
        if violated {
            let projected = delta.project_l2_ball(radius)?;
            let restored: Vec<f64> = origin
                .data()
                .iter()
                .zip(projected.data())
                .map(|(o, d)| o + d)
                .collect();
            current.module_mut(module)?.assign_flat(&restored)?;
        }
        let loss = cache.mean_loss(spec, &current)?;
        if loss > best_loss {
            best_loss = loss;
            best = current.clone();
        }
        if violated && !cfg.project_and_continue {
            terminated_early = true;
            break;
        }
    }

    Ok((
        ModuleMrc {
            value: best_loss - base_loss,
            perturbed: best,
            base_loss,
            epochs_run,
            terminated_early,
            forward_backward_count: cost,
        },
        cache,
    ))
}

/// MRC of every module over one shared adversarial set built from `data`.
pub fn mrc_scan(
    spec: &NetworkSpec,
    theta: &ParamSet,
    data: &Dataset,
    cfg: &MrcConfig,
    seed: u64,
) -> Result<MrcReport> {
    cfg.validate()?;
    let adv = build_adv_set(spec, theta, data, &cfg.attack, seed)?;
    mrc_scan_with(spec, theta, &adv, cfg)
}

/// As [`mrc_scan`], with a prebuilt adversarial set.
pub fn mrc_scan_with(
    spec: &NetworkSpec,
    theta: &ParamSet,
    adv: &AdvDataset,
    cfg: &MrcConfig,
) -> Result<MrcReport> {
    let records = spec
        .module_names()
        .into_par_iter()
        .map(|name| {
            let (m, cache) = run_module(spec, theta, name, adv, cfg)?;
            let before = cache.accuracy(spec, theta)?;
            let after = cache.accuracy(spec, &m.perturbed)?;
            Ok(MrcRecord {
                module_name: name.to_string(),
                mrc_value: m.value,
                robust_acc_before: before,
                robust_acc_after: after,
                robust_acc_drop: before - after,
                forward_backward_count: m.forward_backward_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MrcReport { records })
}

/// The `k` modules of smallest MRC, ascending; ties keep network order.
pub fn select_non_robust_critical(report: &MrcReport, k: usize) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > report.records.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} modules in the report",
            report.records.len()
        )));
    }
    let mut order: Vec<&MrcRecord> = report.records.iter().collect();
    order.sort_by(|a, b| a.mrc_value.total_cmp(&b.mrc_value));
    Ok(order.into_iter().take(k).map(|r| r.module_name.clone()).collect())
}

/// The module of largest MRC; ties keep network order.
pub fn most_robust_critical(report: &MrcReport) -> Result<String> {
    report
        .records
        .iter()
        .reduce(|best, r| if r.mrc_value > best.mrc_value { r } else { best })
        .map(|r| r.module_name.clone())
        .ok_or_else(|| Error::InvalidArgument("empty report".into()))
}
