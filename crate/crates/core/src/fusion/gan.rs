//! Cross-modal adversarial fusion.
//!
//! Each [`GanFusionModule`] owns a generator that maps its source latent (plus
//! Gaussian noise) toward the other modality's latent distribution and a
//! discriminator that tells the real cross-modal latent from the generated one.
//! The adversarial objective of one module is
//!
//! ```text
//! J_adv = mean log D(real) + mean log(1 − D(G([source; ε])))
//! ```
//!
//! which the discriminator ascends and the generator descends.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Activation, DenseLayer};
use crate::numcore::{Graph, ParamId, ParamStore, Tensor, Var};

/// Discriminator outputs are clamped to `[D_EPSILON, 1 − D_EPSILON]` before logs.
pub const D_EPSILON: f64 = 1e-7;

/// Form of the generator's minimisation target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// Minimise `−mean log D(z_g)`.
    #[default]
    NonSaturating,
    /// Minimise `mean log(1 − D(z_g))`, the generator side of the minimax objective as written.
    Saturating,
}

/// Source of the generator noise. `None` substitutes the noise mean (zero).
pub type NoiseSource<'a> = Option<&'a mut dyn RngCore>;

#[derive(Debug, Clone, PartialEq)]
pub struct GanFusionModule {
    pub generator: [DenseLayer; 2],
    pub discriminator: [DenseLayer; 2],
    noise_dim: usize,
    latent_dim: usize,
}

impl GanFusionModule {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        latent_dim: usize,
        noise_dim: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let d = latent_dim;
        let generator = [
            DenseLayer::new(store, &format!("{name}.generator.hidden"), d + noise_dim, 2 * d, Activation::Relu, rng),
            DenseLayer::new(store, &format!("{name}.generator.out"), 2 * d, d, Activation::Identity, rng),
        ];
        let discriminator = [
            DenseLayer::new(store, &format!("{name}.discriminator.hidden"), d, 2 * d, Activation::Relu, rng),
            DenseLayer::new(store, &format!("{name}.discriminator.out"), 2 * d, 1, Activation::Sigmoid, rng),
        ];
        Self {
            generator,
            discriminator,
            noise_dim,
            latent_dim,
        }
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn generator_params(&self) -> Vec<ParamId> {
        self.generator.iter().flat_map(DenseLayer::params).collect()
    }

    pub fn discriminator_params(&self) -> Vec<ParamId> {
        self.discriminator.iter().flat_map(DenseLayer::params).collect()
    }

    /// Draws one noise vector, or zeros when no source is given.
    pub fn sample_noise(&self, noise: &mut NoiseSource<'_>) -> Vec<f64> {
        match noise {
            Some(rng) => (0..self.noise_dim)
                .map(|_| StandardNormal.sample(&mut **rng))
                .collect(),
            None => vec![0.0; self.noise_dim],
        }
    }

    /// `z_g = G([source; ε])`.
    pub fn generate(&self, g: &mut Graph, store: &ParamStore, source: Var, noise: &mut NoiseSource<'_>) -> Result<Var> {
        let shape = g.value(source).shape();
        if shape != [self.latent_dim] {
            return Err(Error::dim("gan_generate", shape, &[self.latent_dim]));
        }
        let input = if self.noise_dim > 0 {
            let eps = g.constant(Tensor::vector(&self.sample_noise(noise)))?;
            g.concat(&[source, eps], 0)?
        } else {
            source
        };
        let h = self.generator[0].forward(g, store, input)?;
        self.generator[1].forward(g, store, h)
    }

    /// Clamped discriminator score in `[ε, 1 − ε]`, shape `[1]`.
    pub fn discriminate(&self, g: &mut Graph, store: &ParamStore, z: Var) -> Result<Var> {
        let h = self.discriminator[0].forward(g, store, z)?;
        let p = self.discriminator[1].forward(g, store, h)?;
        g.clamp(p, D_EPSILON, 1.0 - D_EPSILON)
    }

    /// Minibatch `J_adv` of this module from paired real/generated latents.
    pub fn adversarial_objective(&self, g: &mut Graph, store: &ParamStore, reals: &[Var], fakes: &[Var]) -> Result<AdversarialTerms> {
        if reals.is_empty() || reals.len() != fakes.len() {
            return Err(Error::Input(format!(
                "adversarial objective needs equal non-empty batches, got {} real and {} generated",
                reals.len(),
                fakes.len()
            )));
        }
        let d_real = reals
            .iter()
            .map(|z| self.discriminate(g, store, *z))
            .collect::<Result<Vec<_>>>()?;
        let d_fake = fakes
            .iter()
            .map(|z| self.discriminate(g, store, *z))
            .collect::<Result<Vec<_>>>()?;
        let real_scores = g.concat(&d_real, 0)?;
        let log_real = g.log(real_scores)?;
        let real_term = g.mean(log_real)?;
        let fake_scores = g.concat(&d_fake, 0)?;
        let neg = g.neg(fake_scores)?;
        let complement = g.add_scalar(neg, 1.0)?;
        let log_fake = g.log(complement)?;
        let fake_term = g.mean(log_fake)?;
        let objective = g.add(real_term, fake_term)?;
        Ok(AdversarialTerms {
            objective,
            d_real,
            d_fake,
        })
    }

    /// Generator-side term to minimise, from generated latents only.
    pub fn generator_objective(&self, g: &mut Graph, store: &ParamStore, fakes: &[Var], form: GeneratorLoss) -> Result<Var> {
        if fakes.is_empty() {
            return Err(Error::Input("generator objective of an empty batch".into()));
        }
        let scores = fakes
            .iter()
            .map(|z| self.discriminate(g, store, *z))
            .collect::<Result<Vec<_>>>()?;
        let scores = g.concat(&scores, 0)?;
        match form {
            GeneratorLoss::NonSaturating => {
                let l = g.log(scores)?;
                let m = g.mean(l)?;
                g.neg(m)
            }
            GeneratorLoss::Saturating => {
                let neg = g.neg(scores)?;
                let complement = g.add_scalar(neg, 1.0)?;
                let l = g.log(complement)?;
                g.mean(l)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdversarialTerms {
    /// Scalar `J_adv` component.
    pub objective: Var,
    pub d_real: Vec<Var>,
    pub d_fake: Vec<Var>,
}

/// Text module, visual module and the feed-forward combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct GanFusion {
    /// `GAN_t`: generator input `z_t`, real samples `z_v`.
    pub text: GanFusionModule,
    /// `GAN_v`: generator input `z_v`, real samples `z_t`.
    pub visual: GanFusionModule,
    pub combiner: DenseLayer,
    include_latents: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GanFusionOutput {
    pub fused: Var,
    /// `z_g` of the text module.
    pub generated_text: Var,
    /// `z_g` of the visual module.
    pub generated_visual: Var,
}

impl GanFusion {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        latent_dim: usize,
        noise_dim: usize,
        fuse_dim: usize,
        include_latents: bool,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let text = GanFusionModule::new(store, &format!("{name}.gan_t"), latent_dim, noise_dim, rng);
        let visual = GanFusionModule::new(store, &format!("{name}.gan_v"), latent_dim, noise_dim, rng);
        let combiner_in = if include_latents { 4 * latent_dim } else { 2 * latent_dim };
        let combiner = DenseLayer::new(
            store,
            &format!("{name}.combiner"),
            combiner_in,
            fuse_dim,
            Activation::Tanh,
            rng,
        );
        Self {
            text,
            visual,
            combiner,
            include_latents,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.combiner.out_dim()
    }

    pub fn includes_latents(&self) -> bool {
        self.include_latents
    }

    pub fn discriminator_params(&self) -> Vec<ParamId> {
        let mut ids = self.text.discriminator_params();
        ids.extend(self.visual.discriminator_params());
        ids
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.text.generator_params();
        ids.extend(self.text.discriminator_params());
        ids.extend(self.visual.generator_params());
        ids.extend(self.visual.discriminator_params());
        ids.extend(self.combiner.params());
        ids
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, z_v: Var, z_t: Var, noise: &mut NoiseSource<'_>) -> Result<GanFusionOutput> {
        let generated_text = self.text.generate(g, store, z_t, noise)?;
        let generated_visual = self.visual.generate(g, store, z_v, noise)?;
        let mut parts = vec![generated_text, generated_visual];
        if self.include_latents {
            parts.extend([z_v, z_t]);
        }
        let joint = g.concat(&parts, 0)?;
        let fused = self.combiner.forward(g, store, joint)?;
        Ok(GanFusionOutput {
            fused,
            generated_text,
            generated_visual,
        })
    }
}

/// Value-level result of one module's adversarial objective on one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GanLossValue {
    pub objective: f64,
    pub generated: Vec<f64>,
    pub d_real: f64,
    pub d_generated: f64,
}

/// `J_adv` of one module for a single paired sample: `real` is the latent the
/// generator imitates and `source` is the generator's input.
pub fn gan_adv_loss(
    module: &GanFusionModule,
    store: &ParamStore,
    real: &[f64],
    source: &[f64],
    rng: &mut dyn RngCore,
) -> Result<GanLossValue> {
    let d = module.latent_dim();
    if real.len() != d || source.len() != d {
        return Err(Error::dim("gan_adv_loss", &[real.len()], &[source.len()]));
    }
    let mut g = Graph::new();
    let r = g.constant(Tensor::vector(real))?;
    let s = g.constant(Tensor::vector(source))?;
    let z_g = module.generate(&mut g, store, s, &mut Some(rng))?;
    let terms = module.adversarial_objective(&mut g, store, &[r], &[z_g])?;
    Ok(GanLossValue {
        objective: g.scalar(terms.objective),
        generated: g.value(z_g).data().to_vec(),
        d_real: g.scalar(terms.d_real[0]),
        d_generated: g.scalar(terms.d_fake[0]),
    })
}

/// `J_adv = J_adv^t + J_adv^v`.
pub fn total_gan_loss(text_component: f64, visual_component: f64) -> Result<f64> {
    let total = text_component + visual_component;
    if !text_component.is_finite() || !visual_component.is_finite() || !total.is_finite() {
        return Err(Error::NonFinite {
            op: "total_gan_loss",
        });
    }
    Ok(total)
}
