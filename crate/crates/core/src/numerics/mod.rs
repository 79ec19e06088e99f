//! Dense arrays, seeded randomness and the projection primitives shared by
//! every other module.

mod rng;
mod tensor;

pub use rng::{derive_seed, Rng};
pub use tensor::{axpy, Tensor};
