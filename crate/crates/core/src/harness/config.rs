//! Run configuration: `key = value` lines, `#` comments, dotted namespaces.
//! Every key has a default; unknown keys are rejected.

use std::collections::HashSet;

use super::data::{gen_synthetic, Dataset, Split, SyntheticKind};
use crate::attack::{AttackConfig, TrainSchedule};
use crate::error::{Error, Result};
use crate::mrc::MrcConfig;
use crate::network::NetworkSpec;
use crate::numerics::derive_seed;
use crate::rift::{FineTuneConfig, ModuleSelection, SweepConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data_kind: SyntheticKind,
    pub train_n: usize,
    pub test_n: usize,
    pub model_width: usize,
    pub eps_x: f64,
    /// `None` means `eps_x / 4`.
    pub step_size: Option<f64>,
    pub attack_steps: usize,
    pub rand_init: bool,
    pub train: TrainSchedule,
    pub mrc: MrcConfig,
    pub finetune: FineTuneConfig,
    pub modules: ModuleSelection,
    pub sweep: SweepConfig,
}

/// Every key with its documentation, in rendering order.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed; every other seed is derived from it"),
    ("data.kind", "synthetic dataset: blobs2d | rings2d | shapes8x8"),
    ("data.train_n", "training samples"),
    ("data.test_n", "held-out samples used for selection and evaluation"),
    ("model.width", "base width: CNN channels for shapes8x8, hidden units otherwise"),
    ("attack.eps_x", "l_inf input budget (fractions like 8/255 accepted)"),
    ("attack.step_size", "PGD step; auto = eps_x / 4"),
    ("attack.steps", "PGD iterations"),
    ("attack.rand_init", "uniform random start inside the budget"),
    ("train.epochs", "adversarial training epochs"),
    ("train.lr", "initial learning rate"),
    ("train.decay_epochs", "comma-separated epochs where the rate is divided by decay_factor"),
    ("train.decay_factor", "learning-rate divisor at each decay epoch"),
    ("train.momentum", "SGD momentum"),
    ("train.weight_decay", "L2 weight decay"),
    ("train.batch_size", "mini-batch size"),
    ("mrc.eps_w", "weight perturbation radius relative to the module norm"),
    ("mrc.steps", "ascent epochs"),
    ("mrc.gamma", "ascent learning rate"),
    ("mrc.batch_size", "ascent mini-batch size"),
    ("mrc.project_and_continue", "keep ascending after a projection instead of stopping"),
    ("finetune.lr", "initial fine-tuning learning rate"),
    ("finetune.epochs", "fine-tuning epochs"),
    ("finetune.decay_at_epoch", "epoch from which the rate is divided by decay_factor"),
    ("finetune.decay_factor", "learning-rate divisor"),
    ("finetune.momentum", "SGD momentum"),
    ("finetune.weight_decay", "L2 weight decay on the fine-tuned modules"),
    ("finetune.batch_size", "mini-batch size"),
    ("finetune.modules", "auto | auto:K | critical | all | last | name[,name...]"),
    ("sweep.alpha_step", "interpolation grid step"),
    ("sweep.tolerance", "allowed robust-accuracy loss in percentage points"),
];

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainSchedule {
            epochs: 30,
            initial_lr: 0.02,
            decay_epochs: vec![20, 25],
            decay_factor: 10.0,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 16,
            seed: 0,
        };
        Self {
            seed: 0,
            data_kind: SyntheticKind::Shapes8x8,
            train_n: 1024,
            test_n: 512,
            model_width: 8,
            eps_x: 8.0 / 255.0,
            step_size: None,
            attack_steps: 10,
            rand_init: true,
            train,
            mrc: MrcConfig::default(),
            // Tenfold the fine-tuning rate used at full scale: at 0.001 the
            // desk-scale run never beats its starting point.
            finetune: FineTuneConfig { lr: 0.01, ..FineTuneConfig::default() },
            modules: ModuleSelection::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::InvalidConfig(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| match e {
                    Error::InvalidConfig(msg) => Error::InvalidConfig(format!("line {}: {msg}", i + 1)),
                    other => other,
                })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_int(key, value)?,
            "data.kind" => self.data_kind = value.parse()?,
            "data.train_n" => self.train_n = parse_int(key, value)?,
            "data.test_n" => self.test_n = parse_int(key, value)?,
            "model.width" => self.model_width = parse_int(key, value)?,
            "attack.eps_x" => self.eps_x = parse_real(key, value)?,
            "attack.step_size" => {
                self.step_size = if value == "auto" { None } else { Some(parse_real(key, value)?) }
            }
            "attack.steps" => self.attack_steps = parse_int(key, value)?,
            "attack.rand_init" => self.rand_init = parse_bool(key, value)?,
            "train.epochs" => self.train.epochs = parse_int(key, value)?,
            "train.lr" => self.train.initial_lr = parse_real(key, value)?,
            "train.decay_epochs" => {
                self.train.decay_epochs = if value.is_empty() || value == "none" {
                    Vec::new()
                } else {
                    value.split(',').map(|v| parse_int(key, v.trim())).collect::<Result<_>>()?
                }
            }
            "train.decay_factor" => self.train.decay_factor = parse_real(key, value)?,
            "train.momentum" => self.train.momentum = parse_real(key, value)?,
            "train.weight_decay" => self.train.weight_decay = parse_real(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_int(key, value)?,
            "mrc.eps_w" => self.mrc.eps_w = parse_real(key, value)?,
            "mrc.steps" => self.mrc.steps = parse_int(key, value)?,
            "mrc.gamma" => self.mrc.gamma = parse_real(key, value)?,
            "mrc.batch_size" => self.mrc.batch_size = parse_int(key, value)?,
            "mrc.project_and_continue" => self.mrc.project_and_continue = parse_bool(key, value)?,
            "finetune.lr" => self.finetune.lr = parse_real(key, value)?,
            "finetune.epochs" => self.finetune.epochs = parse_int(key, value)?,
            "finetune.decay_at_epoch" => self.finetune.decay_at_epoch = parse_int(key, value)?,
            "finetune.decay_factor" => self.finetune.decay_factor = parse_real(key, value)?,
            "finetune.momentum" => self.finetune.momentum = parse_real(key, value)?,
            "finetune.weight_decay" => self.finetune.weight_decay = parse_real(key, value)?,
            "finetune.batch_size" => self.finetune.batch_size = parse_int(key, value)?,
            "finetune.modules" => self.modules = value.parse()?,
            "sweep.alpha_step" => self.sweep.alpha_step = parse_real(key, value)?,
            "sweep.tolerance" => self.sweep.tolerance = parse_real(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "data.kind" => self.data_kind.to_string(),
            "data.train_n" => self.train_n.to_string(),
            "data.test_n" => self.test_n.to_string(),
            "model.width" => self.model_width.to_string(),
            "attack.eps_x" => self.eps_x.to_string(),
            "attack.step_size" => self.step_size.map_or("auto".into(), |s| s.to_string()),
            "attack.steps" => self.attack_steps.to_string(),
            "attack.rand_init" => self.rand_init.to_string(),
            "train.epochs" => self.train.epochs.to_string(),
            "train.lr" => self.train.initial_lr.to_string(),
            "train.decay_epochs" => {
                if self.train.decay_epochs.is_empty() {
                    "none".into()
                } else {
                    let v: Vec<String> = self.train.decay_epochs.iter().map(|e| e.to_string()).collect();
                    v.join(",")
                }
            }
            "train.decay_factor" => self.train.decay_factor.to_string(),
            "train.momentum" => self.train.momentum.to_string(),
            "train.weight_decay" => self.train.weight_decay.to_string(),
            "train.batch_size" => self.train.batch_size.to_string(),
            "mrc.eps_w" => self.mrc.eps_w.to_string(),
            "mrc.steps" => self.mrc.steps.to_string(),
            "mrc.gamma" => self.mrc.gamma.to_string(),
            "mrc.batch_size" => self.mrc.batch_size.to_string(),
            "mrc.project_and_continue" => self.mrc.project_and_continue.to_string(),
            "finetune.lr" => self.finetune.lr.to_string(),
            "finetune.epochs" => self.finetune.epochs.to_string(),
            "finetune.decay_at_epoch" => self.finetune.decay_at_epoch.to_string(),
            "finetune.decay_factor" => self.finetune.decay_factor.to_string(),
            "finetune.momentum" => self.finetune.momentum.to_string(),
            "finetune.weight_decay" => self.finetune.weight_decay.to_string(),
            "finetune.batch_size" => self.finetune.batch_size.to_string(),
            "finetune.modules" => self.modules.to_string(),
            "sweep.alpha_step" => self.sweep.alpha_step.to_string(),
            "sweep.tolerance" => self.sweep.tolerance.to_string(),
            _ => return None,
        })
    }

    /// Fully resolved configuration in the input format; parsing it back
    /// yields an identical config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            out.push_str(&format!("# {doc}\n{key} = {}\n", self.get(key).unwrap()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_n == 0 || self.test_n == 0 || self.model_width == 0 {
            return Err(Error::InvalidConfig("sizes must be positive".into()));
        }
        self.attack().validate()?;
        self.schedule().validate()?;
        self.mrc_config().validate()?;
        self.finetune_config().validate()?;
        crate::rift::alpha_grid(self.sweep.alpha_step)?;
        if !(self.sweep.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("sweep.tolerance must be >= 0".into()));
        }
        Ok(())
    }

    pub fn attack(&self) -> AttackConfig {
        AttackConfig {
            eps_x: self.eps_x,
            step_size: self.step_size.unwrap_or(self.eps_x / 4.0),
            steps: self.attack_steps,
            rand_init: self.rand_init,
            input_bounds: (0.0, 1.0),
        }
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule { seed: derive_seed(self.seed, 0x7A), ..self.train.clone() }
    }

    pub fn standard_schedule(&self) -> TrainSchedule {
        TrainSchedule { seed: derive_seed(self.seed, 0x57D), ..self.train.clone() }
    }

    pub fn mrc_config(&self) -> MrcConfig {
        MrcConfig { attack: self.attack(), ..self.mrc }
    }

    pub fn finetune_config(&self) -> FineTuneConfig {
        FineTuneConfig { seed: derive_seed(self.seed, 0xF1), ..self.finetune.clone() }
    }

    pub fn network(&self) -> Result<NetworkSpec> {
        let classes = self.data_kind.num_classes();
        match self.data_kind {
            SyntheticKind::Shapes8x8 => NetworkSpec::small_cnn(self.model_width, classes),
            SyntheticKind::Blobs2d | SyntheticKind::Rings2d => {
                NetworkSpec::mlp(2, &[self.model_width, self.model_width], classes)
            }
        }
    }

    /// Training and held-out splits.
    pub fn datasets(&self) -> Result<(Dataset, Dataset)> {
        let train = gen_synthetic(self.data_kind, self.train_n, derive_seed(self.seed, 0xDA7A), Split::Train)?;
        let test = gen_synthetic(self.data_kind, self.test_n, derive_seed(self.seed, 0x7E57), Split::Test)?;
        Ok((train, test))
    }
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{key}`: expected an integer, got `{value}`")))
}

/// Real number, also accepting a fraction `a/b`.
fn parse_real(key: &str, value: &str) -> Result<f64> {
    let bad = || Error::InvalidConfig(format!("`{key}`: expected a number, got `{value}`"));
    let v = match value.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => value.parse().map_err(|_| bad())?,
    };
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}
