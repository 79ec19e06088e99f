use super::params::{FreezeMask, GradSet, ParamSet};
use crate::error::{Error, Result};

/// Momentum buffers, one per parameter.
#[derive(Debug, Clone)]
pub struct MomentumState {
    velocity: ParamSet,
}

impl MomentumState {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            velocity: params.zeros_like(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

/// One SGD-with-momentum step on the unfrozen layers:
/// `v <- momentum * v + (grad + weight_decay * w)`, `w <- w - lr * v`.
///
/// Frozen layers are skipped entirely, so neither their weights nor their
/// momentum buffers change.
pub fn sgd_step(
    params: &mut ParamSet,
    grads: &GradSet,
    cfg: SgdConfig,
    mask: &FreezeMask,
    state: &mut MomentumState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::InvalidArgument("optimizer inputs are not congruent".into()));
    }
    for (((name, p), (gname, g)), (_, v)) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.velocity.iter_mut())
    {
        if name != gname {
            return Err(Error::UnknownModule(gname.to_string()));
        }
        if mask.is_frozen(name) {
            continue;
        }
        update(
            p.weight.data_mut(),
            g.weight.data(),
            v.weight.data_mut(),
            cfg,
        )?;
        match (&mut p.bias, &g.bias, &mut v.bias) {
            (Some(pb), Some(gb), Some(vb)) => update(pb.data_mut(), gb.data(), vb.data_mut(), cfg)?,
            (None, None, None) => {}
            _ => return Err(Error::InvalidArgument("bias presence differs".into())),
        }
    }
    Ok(())
}

fn update(w: &mut [f64], g: &[f64], v: &mut [f64], cfg: SgdConfig) -> Result<()> {
    if w.len() != g.len() || w.len() != v.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![w.len()],
            found: vec![g.len()],
        });
    }
    for ((wi, gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *vi = cfg.momentum * *vi + (gi + cfg.weight_decay * *wi);
        if cfg.lr != 0.0 {
            *wi -= cfg.lr * *vi;
        }
    }
    Ok(())
}
