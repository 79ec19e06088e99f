use rayon::prelude::*;

use crate::attack::AttackConfig;
use crate::error::{Error, Result};
use crate::harness::{adv_seeds, eval_adv, eval_std, Dataset};
use crate::network::{NetworkSpec, ParamSet};

/// `(1 - alpha) * theta_at + alpha * theta_ft`, elementwise.
///
/// Entries that are bitwise equal in both sets (frozen modules) are copied
/// unchanged, and the endpoints return exact copies.
pub fn interpolate(theta_at: &ParamSet, theta_ft: &ParamSet, alpha: f64) -> Result<ParamSet> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    // Congruence is checked even for the endpoints.
    let mixed = theta_at.zip_map(theta_ft, |a, b| {
        if a.to_bits() == b.to_bits() {
            a
        } else {
            (1.0 - alpha) * a + alpha * b
        }
    })?;
    Ok(if alpha == 0.0 {
        theta_at.clone()
    } else if alpha == 1.0 {
        theta_ft.clone()
    } else {
        mixed
    })
}

/// `0, step, 2 step, ..., 1`; `1 / step` must be an integer.
pub fn alpha_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidConfig(format!("alpha step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("1 / alpha step must be an integer, got step {step}")));
    }
    let n = n as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub alpha_step: f64,
    /// Allowed robust-accuracy loss, in percentage points.
    pub tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { alpha_step: 0.05, tolerance: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub alpha: f64,
    pub std_acc: f64,
    pub adv_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSweep {
    /// Ascending in alpha, starting at 0 and ending at 1.
    pub records: Vec<SweepRecord>,
    pub alpha_star: f64,
    pub tolerance: f64,
}

impl InterpolationSweep {
    pub fn selected(&self) -> &SweepRecord {
        self.records
            .iter()
            .find(|r| r.alpha == self.alpha_star)
            .expect("alpha_star is on the grid")
    }

    /// One `alpha\tstd_acc\tadv_acc` line per grid point, four decimals.
    pub fn render(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{:.4}\t{:.4}\t{:.4}\n", r.alpha, r.std_acc, r.adv_acc))
            .collect()
    }

    pub fn parse(text: &str, tolerance: f64) -> Result<Self> {
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let f: Vec<f64> = line
                .split('\t')
                .map(|v| v.parse().map_err(|_| Error::Malformed(format!("bad sweep line `{line}`"))))
                .collect::<Result<_>>()?;
            if f.len() != 3 {
                return Err(Error::Malformed(format!("bad sweep line `{line}`")));
            }
            records.push(SweepRecord { alpha: f[0], std_acc: f[1], adv_acc: f[2] });
        }
        let alpha_star = select_alpha(&records, tolerance)?;
        Ok(Self { records, alpha_star, tolerance })
    }
}

/// Selection rule: among coefficients whose robust accuracy is at least the
/// first record's minus `tolerance`, the one of highest standard accuracy;
/// ties go to the larger coefficient. `records[0]` is the reference point.
pub fn select_alpha(records: &[SweepRecord], tolerance: f64) -> Result<f64> {
    let base = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty sweep".into()))?;
    let floor = base.adv_acc - tolerance;
    let mut best = base;
    for r in records.iter().filter(|r| r.adv_acc >= floor) {
        if r.std_acc >= best.std_acc {
            best = r;
        }
    }
    Ok(best.alpha)
}

/// Evaluates standard and worst-of-3 adversarial accuracy along the line from
/// `theta_at` to `theta_ft` and applies [`select_alpha`].
pub fn sweep_and_select(
    spec: &NetworkSpec,
    theta_at: &ParamSet,
    theta_ft: &ParamSet,
    eval: &Dataset,
    attack: &AttackConfig,
    cfg: &SweepConfig,
    seed: u64,
) -> Result<InterpolationSweep> {
    let alphas = alpha_grid(cfg.alpha_step)?;
    let seeds = adv_seeds(seed);
    let records = alphas
        .into_par_iter()
        .map(|alpha| {
            let theta = interpolate(theta_at, theta_ft, alpha)?;
            Ok(SweepRecord {
                alpha,
                std_acc: eval_std(spec, &theta, eval)?,
                adv_acc: eval_adv(spec, &theta, eval, attack, seeds)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let alpha_star = select_alpha(&records, cfg.tolerance)?;
    Ok(InterpolationSweep { records, alpha_star, tolerance: cfg.tolerance })
}
