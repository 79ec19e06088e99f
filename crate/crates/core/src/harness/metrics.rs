use std::fmt::Write as _;

use super::corrupt::{corrupt, CorruptionKind, CorruptionSpec};
use super::data::Dataset;
use crate::attack::{adversarial_accuracy, predict, AttackConfig};
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, ParamSet};
use crate::numerics::derive_seed;

/// Standard accuracy in percent.
pub fn eval_std(spec: &NetworkSpec, params: &ParamSet, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let preds = predict(spec, params, ds)?;
    let correct = preds.iter().zip(ds.labels()).filter(|(p, y)| p == y).count();
    Ok(100.0 * correct as f64 / ds.len() as f64)
}

/// Adversarial accuracy of each of three independently seeded PGD runs.
pub fn eval_adv_runs(
    spec: &NetworkSpec,
    params: &ParamSet,
    ds: &Dataset,
    cfg: &AttackConfig,
    seeds: [u64; 3],
) -> Result<[f64; 3]> {
    let cfg = AttackConfig { rand_init: true, ..*cfg };
    let mut out = [0.0; 3];
    for (slot, seed) in out.iter_mut().zip(seeds) {
        *slot = adversarial_accuracy(spec, params, ds, &cfg, seed)?;
    }
    Ok(out)
}

/// Worst of three seeded PGD runs, in percent.
pub fn eval_adv(
    spec: &NetworkSpec,
    params: &ParamSet,
    ds: &Dataset,
    cfg: &AttackConfig,
    seeds: [u64; 3],
) -> Result<f64> {
    let runs = eval_adv_runs(spec, params, ds, cfg, seeds)?;
    Ok(runs.into_iter().fold(f64::INFINITY, f64::min))
}

/// The three attack seeds derived from a run seed.
pub fn adv_seeds(run_seed: u64) -> [u64; 3] {
    [0, 1, 2].map(|i| derive_seed(run_seed, 0xADD0 + i))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OodReport {
    pub cells: Vec<(CorruptionSpec, f64)>,
    pub mean: f64,
}

impl OodReport {
    /// Mean accuracy per corruption kind, in `CorruptionKind::ALL` order.
    pub fn per_kind(&self) -> Vec<(CorruptionKind, f64)> {
        CorruptionKind::ALL
            .into_iter()
            .filter_map(|k| {
                let accs: Vec<f64> = self
                    .cells
                    .iter()
                    .filter(|(c, _)| c.kind() == k)
                    .map(|(_, a)| *a)
                    .collect();
                (!accs.is_empty()).then(|| (k, accs.iter().sum::<f64>() / accs.len() as f64))
            })
            .collect()
    }
}

/// Standard accuracy on corrupted copies of `ds`, one cell per spec, plus the
/// uniform mean over cells.
pub fn eval_ood(
    spec: &NetworkSpec,
    params: &ParamSet,
    ds: &Dataset,
    corruptions: &[CorruptionSpec],
    seed: u64,
) -> Result<OodReport> {
    if corruptions.is_empty() {
        return Err(Error::InvalidArgument("no corruptions given".into()));
    }
    let mut cells = Vec::with_capacity(corruptions.len());
    for (i, c) in corruptions.iter().enumerate() {
        let corrupted = corrupt(ds, c, derive_seed(seed, i as u64))?;
        cells.push((*c, eval_std(spec, params, &corrupted)?));
    }
    let mean = cells.iter().map(|(_, a)| a).sum::<f64>() / cells.len() as f64;
    Ok(OodReport { cells, mean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub std_acc: f64,
    pub adv_acc: f64,
    pub adv_runs: [f64; 3],
    pub ood: OodReport,
}

impl MetricsReport {
    /// Standard, worst-of-3 adversarial, and OOD accuracy over all 20
    /// corruption cells. Every seed is derived from `run_seed`.
    pub fn evaluate(
        spec: &NetworkSpec,
        params: &ParamSet,
        ds: &Dataset,
        attack: &AttackConfig,
        run_seed: u64,
    ) -> Result<Self> {
        let std_acc = eval_std(spec, params, ds)?;
        let adv_runs = eval_adv_runs(spec, params, ds, attack, adv_seeds(run_seed))?;
        let adv_acc = adv_runs.into_iter().fold(f64::INFINITY, f64::min);
        let ood = eval_ood(spec, params, ds, &CorruptionSpec::all(), derive_seed(run_seed, 0x00D))?;
        Ok(Self { std_acc, adv_acc, adv_runs, ood })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "std_acc\t{:.4}", self.std_acc);
        let _ = writeln!(s, "adv_acc\t{:.4}", self.adv_acc);
        for (i, r) in self.adv_runs.iter().enumerate() {
            let _ = writeln!(s, "adv_run{}\t{:.4}", i + 1, r);
        }
        for (c, a) in &self.ood.cells {
            let _ = writeln!(s, "ood\t{}\t{}\t{:.4}", c.kind(), c.severity(), a);
        }
        for (k, a) in self.ood.per_kind() {
            let _ = writeln!(s, "ood_kind\t{}\t{}\t{:.4}", k, k.group(), a);
        }
        let _ = writeln!(s, "ood_acc\t{:.4}", self.ood.mean);
        s
    }
}
