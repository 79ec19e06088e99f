//! Datasets, corruptions, metrics, checkpoints and run configuration.

mod checkpoint;
mod config;
mod corrupt;
mod data;
mod metrics;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, spec_digest, write_atomic,
};
pub use config::{RunConfig, KEYS};
pub use corrupt::{corrupt, CorruptionKind, CorruptionSpec};
pub use data::{gen_synthetic, Dataset, Split, SyntheticKind};
pub use metrics::{adv_seeds, eval_adv, eval_adv_runs, eval_ood, eval_std, MetricsReport, OodReport};
