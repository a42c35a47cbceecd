//! Contrastive instruction-trajectory learning for graph navigation agents.
//!
//! The crate bundles a small navigation environment, instruction augmentation,
//! differentiable toy encoders on a reverse-mode tape, the circle-loss based
//! coarse and fine-grained contrastive objectives with pair mining and memory
//! banks, and an imitation + actor-critic training loop.
//!
//! Differentiable code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what training and gradient checks use.

pub mod agent;
pub mod autodiff;
pub mod contrast;
pub mod encoder;
pub mod env_graph;
pub mod harness;
pub mod lang;
pub mod oracle;
pub mod scalar;

pub use autodiff::{Gradients, Tape, Var};
pub use scalar::Scalar;

pub type Tape64 = autodiff::Tape<f64>;
pub type Tape32 = autodiff::Tape<f32>;
pub type Params = encoder::EncoderParams<f64>;
pub type Params32 = encoder::EncoderParams<f32>;
pub type Embedding = encoder::EmbeddingRecord<f64>;
pub type Bank = contrast::MemoryBank<f64>;
pub type Margins = contrast::MarginConfig<f64>;
pub type Trainer = agent::Trainer<f64>;
