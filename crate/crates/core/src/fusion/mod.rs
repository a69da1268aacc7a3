//! Fusion of `(z_v, z_t)` into `z_fuse`: concatenation, Auto-Fusion and GAN-Fusion.
//!
//! All three mechanisms emit a vector of [`Fusion::output_dim`] so the same
//! classifier head can sit on any of them.

mod auto;
mod concat;
mod gan;

pub use auto::{auto_fusion_loss, reconstruction_loss, AutoFusion, AutoFusionOutput};
pub use concat::ConcatFusion;
pub use gan::{
    gan_adv_loss, total_gan_loss, AdversarialTerms, GanFusion, GanFusionModule, GanFusionOutput, GanLossValue,
    GeneratorLoss, NoiseSource, D_EPSILON,
};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Activation;
use crate::numcore::{Graph, ParamId, ParamStore, Tensor, Var};

fn default_true() -> bool {
    true
}

fn default_tanh() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FusionConfig {
    Concat {
        /// `None` keeps the raw `2d` concatenation.
        #[serde(default)]
        projection_dim: Option<usize>,
        #[serde(default = "default_tanh")]
        projection_activation: Activation,
    },
    Auto {
        /// Bottleneck size; defaults to `d`.
        #[serde(default)]
        fuse_dim: Option<usize>,
        /// Let the reconstruction loss update the encoders.
        #[serde(default = "default_true")]
        reconstruction_to_encoders: bool,
    },
    Gan {
        /// Defaults to `d`.
        #[serde(default)]
        fuse_dim: Option<usize>,
        /// Defaults to `max(1, d / 4)`.
        #[serde(default)]
        noise_dim: Option<usize>,
        /// Feed `[z_v; z_t]` to the combiner alongside the generator outputs.
        #[serde(default)]
        include_latents: bool,
        #[serde(default)]
        generator_loss: GeneratorLoss,
        /// Let the generator-side adversarial term update the encoders.
        #[serde(default = "default_true")]
        adversarial_to_encoders: bool,
    },
}

impl FusionConfig {
    pub fn concat() -> Self {
        FusionConfig::Concat {
            projection_dim: None,
            projection_activation: Activation::Tanh,
        }
    }

    pub fn auto() -> Self {
        FusionConfig::Auto {
            fuse_dim: None,
            reconstruction_to_encoders: true,
        }
    }

    pub fn gan() -> Self {
        FusionConfig::Gan {
            fuse_dim: None,
            noise_dim: None,
            include_latents: false,
            generator_loss: GeneratorLoss::NonSaturating,
            adversarial_to_encoders: true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FusionConfig::Concat { .. } => "Concat",
            FusionConfig::Auto { .. } => "Auto-Fusion",
            FusionConfig::Gan { .. } => "GAN-Fusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fusion {
    Concat(ConcatFusion),
    Auto(AutoFusion),
    Gan(GanFusion),
}

/// Graph handles produced by one fusion forward pass.
#[derive(Debug, Clone, Copy)]
pub struct FusionOutput {
    pub fused: Var,
    /// `(z, ẑ)` for Auto-Fusion.
    pub reconstruction: Option<(Var, Var)>,
    /// `(z_g^t, z_g^v)` for GAN-Fusion.
    pub generated: Option<(Var, Var)>,
}

impl Fusion {
    pub fn new(store: &mut ParamStore, name: &str, latent_dim: usize, config: FusionConfig, rng: &mut impl Rng) -> Result<Self> {
        let d = latent_dim;
        Ok(match config {
            FusionConfig::Concat {
                projection_dim,
                projection_activation,
            } => Fusion::Concat(ConcatFusion::new(
                store,
                name,
                d,
                projection_dim.map(|p| (p, projection_activation)),
                rng,
            )),
            FusionConfig::Auto { fuse_dim, .. } => Fusion::Auto(AutoFusion::new(store, name, d, fuse_dim.unwrap_or(d), rng)?),
            FusionConfig::Gan {
                fuse_dim,
                noise_dim,
                include_latents,
                ..
            } => {
                let fuse_dim = fuse_dim.unwrap_or(d);
                if fuse_dim == 0 {
                    return Err(Error::Config("gan fuse_dim must be positive".into()));
                }
                Fusion::Gan(GanFusion::new(
                    store,
                    name,
                    d,
                    noise_dim.unwrap_or((d / 4).max(1)),
                    fuse_dim,
                    include_latents,
                    rng,
                ))
            }
        })
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Fusion::Concat(c) => c.output_dim(),
            Fusion::Auto(a) => a.output_dim(),
            Fusion::Gan(g) => g.output_dim(),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match self {
            Fusion::Concat(c) => c.params(),
            Fusion::Auto(a) => a.params(),
            Fusion::Gan(g) => g.params(),
        }
    }

    /// Parameters owned by discriminators (empty unless GAN-Fusion).
    pub fn discriminator_params(&self) -> Vec<ParamId> {
        match self {
            Fusion::Gan(g) => g.discriminator_params(),
            _ => Vec::new(),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, z_v: Var, z_t: Var, noise: &mut NoiseSource<'_>) -> Result<FusionOutput> {
        let (sv, st) = (g.value(z_v).shape(), g.value(z_t).shape());
        if sv != st || sv.len() != 1 {
            return Err(Error::dim("fuse", sv, st));
        }
        Ok(match self {
            Fusion::Concat(c) => FusionOutput {
                fused: c.forward(g, store, z_v, z_t)?,
                reconstruction: None,
                generated: None,
            },
            Fusion::Auto(a) => {
                let out = a.forward(g, store, z_v, z_t)?;
                FusionOutput {
                    fused: out.fused,
                    reconstruction: Some((out.joint, out.reconstruction)),
                    generated: None,
                }
            }
            Fusion::Gan(gan) => {
                let out = gan.forward(g, store, z_v, z_t, noise)?;
                FusionOutput {
                    fused: out.fused,
                    reconstruction: None,
                    generated: Some((out.generated_text, out.generated_visual)),
                }
            }
        })
    }
}

/// Value-level fusion result with the mechanism's auxiliary outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub z_fuse: Vec<f64>,
    /// `ẑ` (Auto-Fusion).
    pub reconstruction: Option<Vec<f64>>,
    /// `(z_g^t, z_g^v)` (GAN-Fusion).
    pub generated: Option<(Vec<f64>, Vec<f64>)>,
    /// Discriminator scores `(D_t(z_g^t), D_v(z_g^v))` (GAN-Fusion).
    pub discriminator_scores: Option<(f64, f64)>,
}

/// Fuses one pair of latents. Generator noise is drawn from `rng`.
pub fn fuse(z_v: &[f64], z_t: &[f64], fusion: &Fusion, store: &ParamStore, rng: &mut dyn RngCore) -> Result<FusedVector> {
    if z_v.len() != z_t.len() || z_v.is_empty() {
        return Err(Error::dim("fuse", &[z_v.len()], &[z_t.len()]));
    }
    let mut g = Graph::new();
    let v = g.constant(Tensor::vector(z_v))?;
    let t = g.constant(Tensor::vector(z_t))?;
    let out = fusion.forward(&mut g, store, v, t, &mut Some(rng))?;
    let vec_of = |g: &Graph, v: Var| g.value(v).data().to_vec();
    let discriminator_scores = match (fusion, out.generated) {
        (Fusion::Gan(gan), Some((gt, gv))) => {
            let st = gan.text.discriminate(&mut g, store, gt)?;
            let sv = gan.visual.discriminate(&mut g, store, gv)?;
            Some((g.scalar(st), g.scalar(sv)))
        }
        _ => None,
    };
    Ok(FusedVector {
        z_fuse: vec_of(&g, out.fused),
        reconstruction: out.reconstruction.map(|(_, r)| vec_of(&g, r)),
        generated: out.generated.map(|(a, b)| (vec_of(&g, a), vec_of(&g, b))),
        discriminator_scores,
    })
}
