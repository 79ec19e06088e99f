//! Small feed-forward networks with named modules, exact reverse-mode
//! gradients, freezing, and an SGD-with-momentum step.

mod ops;
mod optim;
mod params;
mod spec;

pub use ops::{argmax_rows, cross_entropy_per_sample, loss_ce, Backward};
pub use optim::{sgd_step, MomentumState, SgdConfig};
pub use params::{FreezeMask, GradSet, LayerParams, ParamSet};
pub use spec::{LayerKind, LayerSpec, NetworkSpec};
