//! Multimodal fusion toolkit.
//!
//! Two modality encoders (a bidirectional recurrent text encoder with word
//! attention and a small convolutional grid encoder) produce equal-dimension
//! latents that are fused by concatenation, an autoencoder (Auto-Fusion) or a
//! pair of cross-modal adversarial modules (GAN-Fusion) before a softmax
//! classifier. Everything differentiates through the [`numcore`] tape.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod cli;
pub mod datakit;
pub mod error;
pub mod fusion;
pub mod layers;
pub mod metrics;
pub mod numcore;
pub mod textprep;
pub mod training;

pub use error::{Error, Result};
