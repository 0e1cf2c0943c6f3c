//! Minimal dense-tensor math with reverse-mode differentiation, the layer
//! set used by the deformation networks, and a decoupled-weight-decay
//! optimizer. Everything is 64-bit and single-threaded by design: gradient
//! checks and reproducibility matter more than speed at this scale.

pub mod checkpoint;
mod error;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod tape;
pub mod tensor;

pub use error::NnError;
pub use layers::{Dense, Mlp};
pub use params::{AdamWConfig, ParameterStore};
pub use tape::{Axis, Tape, Var};
pub use tensor::Tensor;
