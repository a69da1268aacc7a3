//! Neural building blocks and the two modality encoders.
//!
//! Layers own no tensors: they hold [`ParamId`](crate::numcore::ParamId)s into
//! a shared [`ParamStore`](crate::numcore::ParamStore) and record their forward
//! pass on a [`Graph`](crate::numcore::Graph).

mod dense;
mod embedding;
mod text;
mod visual;

pub use dense::{dense_forward, Activation, DenseLayer};
pub use embedding::EmbeddingTable;
pub use text::{encode_text, LstmCell, RecurrentTextEncoder, TextEncoderConfig, TextEncoding};
pub use visual::{encode_visual, ConvVisualEncoder, FeatureVisualEncoder, VisualEncoder, VisualEncoderConfig};

use rand::Rng;

use crate::numcore::Tensor;

/// Uniform initialisation in `[-bound, bound]`.
pub(crate) fn uniform(rng: &mut impl Rng, shape: &[usize], bound: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-bound..=bound))
}

/// Glorot/Xavier uniform initialisation.
pub(crate) fn glorot(rng: &mut impl Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, shape, bound)
}

#[cfg(test)]
mod tests;
