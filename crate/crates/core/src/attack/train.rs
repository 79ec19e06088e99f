use super::{adversarial_accuracy, pgd_attack, AttackConfig};
use crate::error::{Error, Result};
use crate::harness::{eval_std, Dataset};
use crate::network::{sgd_step, FreezeMask, MomentumState, NetworkSpec, ParamSet, SgdConfig};
use crate::numerics::{derive_seed, Rng};

const TAG_INIT: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_ATTACK: u64 = 3;
const TAG_SELECT: u64 = 4;

/// Step-decay SGD schedule for training from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub initial_lr: f64,
    /// Epochs (0-based) at whose start the rate is divided by `decay_factor`.
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 30,
            initial_lr: 0.05,
            decay_epochs: vec![20, 25],
            decay_factor: 10.0,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("decay epochs must be strictly increasing".into()));
        }
        if self.decay_epochs.last().is_some_and(|&e| e >= self.epochs) {
            return Err(Error::InvalidConfig("decay epochs must be < epochs".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.decay_factor > 0.0) || !(self.initial_lr >= 0.0) {
            return Err(Error::InvalidConfig("learning rate and decay factor must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate in effect during 0-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = self.decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.initial_lr / self.decay_factor.powi(decays as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based; 0 is the initial weights.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Held-out accuracy (percent) used for checkpoint selection.
    pub heldout_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub selected_epoch: usize,
}

impl TrainLog {
    pub fn render(&self) -> String {
        let mut s = String::from("epoch\tlr\ttrain_loss\theldout_acc\n");
        for r in &self.records {
            s.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.4}\n",
                r.epoch, r.lr, r.train_loss, r.heldout_acc
            ));
        }
        s.push_str(&format!("selected_epoch\t{}\n", self.selected_epoch));
        s
    }
}

/// Adversarial training: each batch is replaced by its PGD iterate before the
/// SGD step. Returns the epoch (initial weights included) with the highest
/// held-out robust accuracy; ties go to the earliest epoch.
pub fn adversarial_train(
    spec: &NetworkSpec,
    train: &Dataset,
    heldout: &Dataset,
    attack: &AttackConfig,
    schedule: &TrainSchedule,
) -> Result<(ParamSet, TrainLog)> {
    attack.validate()?;
    run(spec, train, heldout, Some(attack), schedule)
}

/// Clean training with the same loop; selection by held-out standard accuracy.
pub fn standard_train(
    spec: &NetworkSpec,
    train: &Dataset,
    heldout: &Dataset,
    schedule: &TrainSchedule,
) -> Result<(ParamSet, TrainLog)> {
    run(spec, train, heldout, None, schedule)
}

fn run(
    spec: &NetworkSpec,
    train: &Dataset,
    heldout: &Dataset,
    attack: Option<&AttackConfig>,
    schedule: &TrainSchedule,
) -> Result<(ParamSet, TrainLog)> {
    schedule.validate()?;
    if train.is_empty() || heldout.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let seed = schedule.seed;
    let mut params = ParamSet::init(spec, &mut Rng::new(derive_seed(seed, TAG_INIT)));
    let select_seed = derive_seed(seed, TAG_SELECT);
    let score = |p: &ParamSet| -> Result<f64> {
        match attack {
            Some(cfg) => adversarial_accuracy(spec, p, heldout, cfg, select_seed),
            None => eval_std(spec, p, heldout),
        }
    };

    let mut log = TrainLog::default();
    let mut best_acc = score(&params)?;
    let mut best = params.clone();
    log.records.push(EpochRecord { epoch: 0, lr: 0.0, train_loss: f64::NAN, heldout_acc: best_acc });

    let mut state = MomentumState::new(&params);
    let mask = FreezeMask::none();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..schedule.epochs {
        let lr = schedule.lr_at(epoch);
        let mut shuffle_rng = Rng::new(derive_seed(seed, TAG_SHUFFLE ^ ((epoch as u64) << 8)));
        shuffle_rng.shuffle(&mut order);
        let mut attack_rng = Rng::new(derive_seed(seed, TAG_ATTACK ^ ((epoch as u64) << 8)));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(schedule.batch_size) {
            let (x, y) = train.gather(chunk);
            let x = match attack {
                Some(cfg) => pgd_attack(spec, &params, &x, &y, cfg, &mut attack_rng)?,
                None => x,
            };
            let bw = spec.backward(&params, &x, &y)?;
            loss_sum += bw.loss * chunk.len() as f64;
            let cfg = SgdConfig { lr, momentum: schedule.momentum, weight_decay: schedule.weight_decay };
            sgd_step(&mut params, &bw.grads, cfg, &mask, &mut state)?;
        }
        let acc = score(&params)?;
        log.records.push(EpochRecord {
            epoch: epoch + 1,
            lr,
            train_loss: loss_sum / train.len() as f64,
            heldout_acc: acc,
        });
        if acc > best_acc {
            best_acc = acc;
            best = params.clone();
            log.selected_epoch = epoch + 1;
        }
    }
    Ok((best, log))
}
