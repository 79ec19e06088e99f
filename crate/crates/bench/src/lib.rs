//! Fixtures shared by the criterion benchmarks.

use rift_core::attack::AttackConfig;
use rift_core::harness::{gen_synthetic, Dataset, Split, SyntheticKind};
use rift_core::{NetworkSpec, ParamSet, Rng};

/// A small CNN with initialized weights and a batch of 8x8 inputs.
pub fn cnn_fixture(width: usize, n: usize) -> (NetworkSpec, ParamSet, Dataset) {
    let spec = NetworkSpec::small_cnn(width, 4).expect("valid spec");
    let params = ParamSet::init(&spec, &mut Rng::new(1));
    let data = gen_synthetic(SyntheticKind::Shapes8x8, n, 2, Split::Train).expect("data");
    (spec, params, data)
}

pub fn default_attack() -> AttackConfig {
    AttackConfig::default()
}
