use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::{eval_std, Dataset};
use crate::mrc::{most_robust_critical, select_non_robust_critical, MrcReport};
use crate::network::{sgd_step, FreezeMask, MomentumState, NetworkSpec, ParamSet, SgdConfig};
use crate::numerics::{derive_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneConfig {
    pub lr: f64,
    pub epochs: usize,
    /// 0-based epoch from which the rate is divided by `decay_factor`.
    pub decay_at_epoch: usize,
    pub decay_factor: f64,
    pub momentum: f64,
    /// L2 penalty on the trainable modules, applied as weight decay.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            epochs: 10,
            decay_at_epoch: 5,
            decay_factor: 10.0,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs > 0 && self.decay_at_epoch >= self.epochs {
            return Err(Error::InvalidConfig("decay_at_epoch must be < epochs".into()));
        }
        if self.batch_size == 0 || !(self.decay_factor > 0.0) || !(self.lr >= 0.0) {
            return Err(Error::InvalidConfig("invalid fine-tuning hyper-parameters".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= self.decay_at_epoch {
            self.lr / self.decay_factor
        } else {
            self.lr
        }
    }
}

/// Which modules to unfreeze.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModuleSelection {
    /// The `k` modules of lowest MRC.
    NonRobustCritical { k: usize },
    /// The module of highest MRC.
    RobustCritical,
    All,
    /// The final module.
    Last,
    Named(Vec<String>),
}

impl Default for ModuleSelection {
    fn default() -> Self {
        ModuleSelection::NonRobustCritical { k: 1 }
    }
}

impl ModuleSelection {
    pub fn resolve(&self, spec: &NetworkSpec, report: &MrcReport) -> Result<Vec<String>> {
        let names = match self {
            ModuleSelection::NonRobustCritical { k } => select_non_robust_critical(report, *k)?,
            ModuleSelection::RobustCritical => vec![most_robust_critical(report)?],
            ModuleSelection::All => spec.module_names().into_iter().map(String::from).collect(),
            ModuleSelection::Last => vec![spec.module_names().last().unwrap().to_string()],
            ModuleSelection::Named(names) => names.clone(),
        };
        for n in &names {
            spec.module_index(n)?;
        }
        Ok(names)
    }
}

impl FromStr for ModuleSelection {
    type Err = Error;

    /// `auto`, `auto:K`, `critical`, `all`, `last`, or a comma-separated list
    /// of module names.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "" => Err(Error::InvalidConfig("empty module selection".into())),
            "auto" => Ok(Self::NonRobustCritical { k: 1 }),
            "critical" => Ok(Self::RobustCritical),
            "all" => Ok(Self::All),
            "last" => Ok(Self::Last),
            _ => {
                if let Some(k) = s.strip_prefix("auto:") {
                    let k = k
                        .parse::<usize>()
                        .ok()
                        .filter(|&k| k > 0)
                        .ok_or_else(|| Error::InvalidConfig(format!("bad module count in `{s}`")))?;
                    return Ok(Self::NonRobustCritical { k });
                }
                let names: Vec<String> = s.split(',').map(|n| n.trim().to_string()).collect();
                if names.iter().any(String::is_empty) {
                    return Err(Error::InvalidConfig(format!("bad module list `{s}`")));
                }
                Ok(Self::Named(names))
            }
        }
    }
}

impl fmt::Display for ModuleSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonRobustCritical { k: 1 } => f.write_str("auto"),
            Self::NonRobustCritical { k } => write!(f, "auto:{k}"),
            Self::RobustCritical => f.write_str("critical"),
            Self::All => f.write_str("all"),
            Self::Last => f.write_str("last"),
            Self::Named(n) => f.write_str(&n.join(",")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FineTuneLog {
    /// Held-out standard accuracy after each epoch; entry 0 is the start.
    pub heldout_acc: Vec<f64>,
    pub selected_epoch: usize,
}

/// Clean fine-tuning of `modules` with every other module frozen. Returns the
/// epoch of highest held-out standard accuracy, the starting weights counting
/// as epoch 0; ties go to the earliest epoch.
pub fn finetune(
    spec: &NetworkSpec,
    theta_at: &ParamSet,
    modules: &[String],
    train: &Dataset,
    heldout: &Dataset,
    cfg: &FineTuneConfig,
) -> Result<(ParamSet, FineTuneLog)> {
    cfg.validate()?;
    if modules.is_empty() {
        return Err(Error::InvalidArgument("module set is empty".into()));
    }
    let mask = FreezeMask::all_except(spec, modules)?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut params = theta_at.clone();
    let mut best = theta_at.clone();
    let mut best_acc = eval_std(spec, &params, heldout)?;
    let mut log = FineTuneLog { heldout_acc: vec![best_acc], selected_epoch: 0 };
    let mut state = MomentumState::new(&params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = Rng::new(derive_seed(cfg.seed, 0xF7 ^ ((epoch as u64) << 8)));
        rng.shuffle(&mut order);
        let sgd = SgdConfig { lr: cfg.lr_at(epoch), momentum: cfg.momentum, weight_decay: cfg.weight_decay };
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train.gather(chunk);
            let bw = spec.backward(&params, &x, &y)?;
            sgd_step(&mut params, &bw.grads, sgd, &mask, &mut state)?;
        }
        let acc = eval_std(spec, &params, heldout)?;
        log.heldout_acc.push(acc);
        if acc > best_acc {
            best_acc = acc;
            best = params.clone();
            log.selected_epoch = epoch + 1;
        }
    }
    Ok((best, log))
}
