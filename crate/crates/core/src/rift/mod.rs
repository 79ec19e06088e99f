//! Robust critical fine-tuning: pick the module whose worst-case perturbation
//! costs the least robustness, fine-tune only that module on clean data, then
//! walk the straight line back toward the adversarially trained weights and
//! keep the point with the best clean accuracy whose robust accuracy stays
//! within tolerance of the start.

mod finetune;
mod sweep;

pub use finetune::{finetune, FineTuneConfig, FineTuneLog, ModuleSelection};
pub use sweep::{alpha_grid, interpolate, select_alpha, sweep_and_select, InterpolationSweep, SweepConfig, SweepRecord};

use crate::error::Result;
use crate::harness::Dataset;
use crate::mrc::{mrc_scan, MrcConfig, MrcReport};
use crate::network::{NetworkSpec, ParamSet};
use crate::numerics::derive_seed;

#[derive(Debug, Clone)]
pub struct RiftOutcome {
    /// Interpolated weights at the selected coefficient.
    pub theta_star: ParamSet,
    /// Fine-tuned endpoint of the sweep.
    pub theta_ft: ParamSet,
    pub modules: Vec<String>,
    pub report: MrcReport,
    pub finetune_log: FineTuneLog,
    pub sweep: InterpolationSweep,
}

/// Runs the three steps end to end: MRC scan on `train`, fine-tuning of the
/// selected modules on `train` (held-out selection on `eval`), and the
/// interpolation sweep on `eval`.
#[allow(clippy::too_many_arguments)]
pub fn rift_pipeline(
    spec: &NetworkSpec,
    theta_at: &ParamSet,
    train: &Dataset,
    eval: &Dataset,
    mrc_cfg: &MrcConfig,
    ft_cfg: &FineTuneConfig,
    selection: &ModuleSelection,
    sweep_cfg: &SweepConfig,
    seed: u64,
) -> Result<RiftOutcome> {
    let report = mrc_scan(spec, theta_at, train, mrc_cfg, derive_seed(seed, 0x3C))?;
    let modules = selection.resolve(spec, &report)?;
    let (theta_ft, finetune_log) = finetune(spec, theta_at, &modules, train, eval, ft_cfg)?;
    let sweep = sweep_and_select(spec, theta_at, &theta_ft, eval, &mrc_cfg.attack, sweep_cfg, seed)?;
    let theta_star = interpolate(theta_at, &theta_ft, sweep.alpha_star)?;
    let base = &sweep.records[0];
    let chosen = sweep.selected();
    assert!(
        chosen.std_acc >= base.std_acc && chosen.adv_acc >= base.adv_acc - sweep.tolerance,
        "selection rule violated"
    );
    Ok(RiftOutcome { theta_star, theta_ft, modules, report, finetune_log, sweep })
}
