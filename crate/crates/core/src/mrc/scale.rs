use crate::error::{Error, Result};
use crate::network::{LayerKind, NetworkSpec, ParamSet};

/// Rescales a pair of consecutive modules separated by a ReLU:
/// `first <- beta * first` (bias included), `second.weight <- second.weight / beta`.
///
/// ReLU is positively homogeneous, so the network computes the same function.
/// Only ReLU and flatten layers may sit between the two modules.
pub fn scale_network(
    spec: &NetworkSpec,
    params: &ParamSet,
    pair: (&str, &str),
    beta: f64,
) -> Result<ParamSet> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let i = spec.module_index(pair.0)?;
    let j = spec.module_index(pair.1)?;
    if j <= i {
        return Err(Error::InvalidArgument(format!("`{}` does not follow `{}`", pair.1, pair.0)));
    }
    let between = &spec.layers()[i + 1..j];
    let homogeneous = between
        .iter()
        .all(|l| matches!(l.kind, LayerKind::Relu | LayerKind::Flatten));
    let has_relu = between.iter().any(|l| l.kind == LayerKind::Relu);
    if !homogeneous || !has_relu {
        return Err(Error::InvalidArgument(format!(
            "`{}` and `{}` are not adjacent modules separated by a ReLU",
            pair.0, pair.1
        )));
    }
    if beta == 1.0 {
        return Ok(params.clone());
    }
    let mut out = params.clone();
    let first = out.module_mut(pair.0)?;
    first.weight = first.weight.scale(beta);
    if let Some(b) = &mut first.bias {
        *b = b.scale(beta);
    }
    let second = out.module_mut(pair.1)?;
    second.weight.data_mut().iter_mut().for_each(|w| *w /= beta);
    Ok(out)
}
