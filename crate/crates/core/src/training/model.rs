use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use crate::datakit::{LabelSpace, Publication, Visual};
use crate::error::{Error, Result};
use crate::fusion::{reconstruction_loss, Fusion, FusionConfig, FusionOutput, GeneratorLoss, NoiseSource};
use crate::layers::{
    Activation, DenseLayer, RecurrentTextEncoder, TextEncoderConfig, VisualEncoder, VisualEncoderConfig,
};
use crate::numcore::{Graph, ParamId, ParamStore, Tensor, Var, LOG_EPSILON};
use crate::textprep::{extract_entity_tuple, normalize, Lexicons};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputModes {
    Text,
    Visual,
    #[default]
    Both,
}

impl InputModes {
    pub fn uses_text(self) -> bool {
        self != InputModes::Visual
    }

    pub fn uses_visual(self) -> bool {
        self != InputModes::Text
    }

    pub fn describe(self) -> &'static str {
        match self {
            InputModes::Text => "text",
            InputModes::Visual => "visual",
            InputModes::Both => "text + visual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextSection {
    #[serde(default = "default_embed")]
    pub embed_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
}

fn default_embed() -> usize {
    32
}
fn default_hidden() -> usize {
    32
}
fn default_latent() -> usize {
    64
}
fn default_min_count() -> usize {
    1
}

impl Default for TextSection {
    fn default() -> Self {
        Self {
            embed_dim: default_embed(),
            hidden_dim: default_hidden(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VisualSection {
    Conv {
        #[serde(default = "one")]
        channels: usize,
        #[serde(default = "default_conv")]
        conv_channels: [usize; 2],
    },
    Features {
        feature_dim: usize,
    },
}

fn one() -> usize {
    1
}
fn default_conv() -> [usize; 2] {
    [8, 8]
}

impl Default for VisualSection {
    fn default() -> Self {
        VisualSection::Conv {
            channels: 1,
            conv_channels: default_conv(),
        }
    }
}

/// Architecture of a [`FusionModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Shared latent size `d` of both encoders.
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    #[serde(default)]
    pub modes: InputModes,
    #[serde(default)]
    pub text: TextSection,
    #[serde(default)]
    pub visual: VisualSection,
    /// Used only when both modalities are enabled.
    #[serde(default = "FusionConfig::gan")]
    pub fusion: FusionConfig,
    /// Append the averaged entity-tuple embedding to the classifier input.
    /// Defaults to on for text-only models and off otherwise.
    #[serde(default)]
    pub entity_tuple: Option<bool>,
    /// Width of the precomputed `entity_features` vector, if used.
    #[serde(default)]
    pub entity_feature_dim: Option<usize>,
    /// Minimum training-set count for a token to enter the vocabulary.
    #[serde(default = "default_min_count")]
    pub min_token_count: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: default_latent(),
            modes: InputModes::Both,
            text: TextSection::default(),
            visual: VisualSection::default(),
            fusion: FusionConfig::gan(),
            entity_tuple: None,
            entity_feature_dim: None,
            min_token_count: 1,
        }
    }
}

impl ModelConfig {
    pub fn uses_entity_tuple(&self) -> bool {
        self.entity_tuple.unwrap_or(self.modes == InputModes::Text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(Error::Config(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        positive(self.latent_dim, "latent_dim")?;
        positive(self.text.embed_dim, "text.embed_dim")?;
        positive(self.text.hidden_dim, "text.hidden_dim")?;
        match self.visual {
            VisualSection::Conv { channels, conv_channels } => {
                positive(channels, "visual.channels")?;
                positive(conv_channels[0].min(conv_channels[1]), "visual.conv_channels")?;
            }
            VisualSection::Features { feature_dim } => positive(feature_dim, "visual.feature_dim")?,
        }
        if let Some(k) = self.entity_feature_dim {
            positive(k, "entity_feature_dim")?;
        }
        if self.uses_entity_tuple() && !self.modes.uses_text() {
            return Err(Error::Config("entity tuples need the text encoder; enable text mode".into()));
        }
        Ok(())
    }

    /// Label used in result tables for the fusion column.
    pub fn fusion_name(&self) -> &'static str {
        match self.modes {
            InputModes::Both => self.fusion.name(),
            _ => "none",
        }
    }
}

/// A publication converted to model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub tokens: Vec<usize>,
    /// Ids of the present entity-tuple slots.
    pub tuple: Vec<usize>,
    pub visual: Option<Tensor>,
    pub entity: Option<Vec<f64>>,
    pub label: usize,
}

/// Graph handles of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    pub probs: Var,
    pub z_v: Option<Var>,
    pub z_t: Option<Var>,
    pub fusion: Option<FusionOutput>,
}

/// Scalar terms of the main (non-discriminator) objective of one batch.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    /// `J_C + λ·J_F`, what the main update descends.
    pub total: Var,
    pub classification: Var,
    /// `J_auto` for Auto-Fusion, the generator-side adversarial term for GAN-Fusion.
    pub fusion: Option<Var>,
}

/// Adversarial objective of one batch, as ascended by the discriminators.
#[derive(Debug, Clone, Copy)]
pub struct AdversarialObjective {
    pub total: Var,
    pub text: Var,
    pub visual: Var,
}

/// Encoders, fusion, optional entity-tuple embedder and the softmax classifier.
#[derive(Debug, Clone)]
pub struct FusionModel {
    pub config: ModelConfig,
    pub labels: LabelSpace,
    pub vocab: Vocabulary,
    pub store: ParamStore,
    pub text: Option<RecurrentTextEncoder>,
    pub visual: Option<VisualEncoder>,
    pub fusion: Option<Fusion>,
    pub classifier: DenseLayer,
    lexicons: Arc<Lexicons>,
}

impl FusionModel {
    pub fn new(
        config: ModelConfig,
        labels: LabelSpace,
        vocab: Vocabulary,
        lexicons: Arc<Lexicons>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        labels.validate()?;
        let d = config.latent_dim;
        let mut store = ParamStore::new();
        let text = (config.modes.uses_text() || config.uses_entity_tuple()).then(|| {
            RecurrentTextEncoder::new(
                &mut store,
                "text",
                TextEncoderConfig {
                    vocab_size: vocab.len().max(2),
                    embed_dim: config.text.embed_dim,
                    hidden_dim: config.text.hidden_dim,
                    latent_dim: d,
                },
                rng,
            )
        });
        let visual = config.modes.uses_visual().then(|| {
            let vc = match config.visual {
                VisualSection::Conv { channels, conv_channels } => VisualEncoderConfig::Conv {
                    channels,
                    conv_channels,
                    latent_dim: d,
                },
                VisualSection::Features { feature_dim } => VisualEncoderConfig::Features {
                    feature_dim,
                    latent_dim: d,
                },
            };
            VisualEncoder::new(&mut store, "visual", vc, rng)
        });
        let fusion = match config.modes {
            InputModes::Both => Some(Fusion::new(&mut store, "fusion", d, config.fusion, rng)?),
            _ => None,
        };
        let mut classifier_in = fusion.as_ref().map_or(d, Fusion::output_dim);
        if config.uses_entity_tuple() {
            classifier_in += config.text.embed_dim;
        }
        classifier_in += config.entity_feature_dim.unwrap_or(0);
        let classifier = DenseLayer::new(
            &mut store,
            "classifier",
            classifier_in,
            labels.len(),
            Activation::Softmax,
            rng,
        );
        Ok(Self {
            config,
            labels,
            vocab,
            store,
            text,
            visual,
            fusion,
            classifier,
            lexicons,
        })
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    /// Parameters owned by GAN discriminators.
    pub fn discriminator_params(&self) -> Vec<ParamId> {
        self.fusion.as_ref().map(Fusion::discriminator_params).unwrap_or_default()
    }

    /// Every parameter that is not a discriminator parameter.
    pub fn main_params(&self) -> Vec<ParamId> {
        let disc = self.discriminator_params();
        self.store.ids().filter(|id| !disc.contains(id)).collect()
    }

    /// Parameters on the recurrent path, which get gradient-norm clipping.
    pub fn recurrent_params(&self) -> Vec<ParamId> {
        self.text.as_ref().map(RecurrentTextEncoder::params).unwrap_or_default()
    }

    pub fn is_gan(&self) -> bool {
        matches!(self.fusion, Some(Fusion::Gan(_)))
    }

    /// Normalizes text, extracts the entity tuple and checks required modalities.
    pub fn prepare(&self, p: &Publication) -> Result<PreparedSample> {
        let mut tokens = Vec::new();
        let mut tuple = Vec::new();
        if self.config.modes.uses_text() || self.config.uses_entity_tuple() {
            let raw = p.full_text();
            if self.config.modes.uses_text() && raw.trim().is_empty() {
                return Err(Error::Input(format!("publication {:?} has no text but the model reads text", p.id)));
            }
            let norm = normalize(&raw, &self.lexicons);
            tokens = self.vocab.encode(&norm);
            if self.config.uses_entity_tuple() {
                tuple = extract_entity_tuple(&norm, &self.lexicons)
                    .slots()
                    .into_iter()
                    .flatten()
                    .map(|w| self.vocab.id(w))
                    .collect();
            }
        }
        let visual = if self.config.modes.uses_visual() {
            match (&p.visual, self.config.visual) {
                (Some(Visual::Grid(g)), VisualSection::Conv { .. }) => Some(g.clone()),
                (Some(Visual::Features(f)), VisualSection::Features { .. }) => Some(Tensor::vector(f)),
                (None, _) => {
                    return Err(Error::Input(format!(
                        "publication {:?} has no visual content but the model reads it",
                        p.id
                    )))
                }
                _ => {
                    return Err(Error::Input(format!(
                        "publication {:?}: visual content kind does not match the visual encoder",
                        p.id
                    )))
                }
            }
        } else {
            None
        };
        let entity = match self.config.entity_feature_dim {
            Some(k) => {
                let f = p.entity_features.as_ref().ok_or_else(|| {
                    Error::Input(format!("publication {:?} lacks entity_features", p.id))
                })?;
                if f.len() != k {
                    return Err(Error::dim("entity_features", &[f.len()], &[k]));
                }
                Some(f.clone())
            }
            None => None,
        };
        if p.label >= self.labels.len() {
            return Err(Error::Input(format!("label {} outside the model's label space", p.label)));
        }
        Ok(PreparedSample {
            tokens,
            tuple,
            visual,
            entity,
            label: p.label,
        })
    }

    /// `(z_v, z_t)` for the enabled modalities.
    pub fn latents(&self, g: &mut Graph, store: &ParamStore, s: &PreparedSample) -> Result<(Option<Var>, Option<Var>)> {
        let z_t = match (&self.text, self.config.modes.uses_text()) {
            (Some(enc), true) => Some(enc.encode(g, store, &s.tokens)?.latent),
            _ => None,
        };
        let z_v = match &self.visual {
            Some(enc) => {
                let v = s
                    .visual
                    .as_ref()
                    .ok_or_else(|| Error::Input("sample lacks visual input".into()))?;
                let x = g.constant(v.clone())?;
                Some(enc.encode(g, store, x)?)
            }
            None => None,
        };
        Ok((z_v, z_t))
    }

    fn tuple_embedding(&self, g: &mut Graph, store: &ParamStore, s: &PreparedSample) -> Result<Var> {
        let enc = self.text.as_ref().expect("tuple embedding requires the text encoder");
        if s.tuple.is_empty() {
            return g.constant(Tensor::zeros(&[self.config.text.embed_dim]));
        }
        let rows = enc.embedding.lookup(g, store, &s.tuple)?;
        let m = s.tuple.len();
        let weights = g.constant(Tensor::vector(&vec![1.0 / m as f64; m]))?;
        g.matmul(weights, rows)
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, s: &PreparedSample, noise: &mut NoiseSource<'_>) -> Result<Forward> {
        let (z_v, z_t) = self.latents(g, store, s)?;
        let (repr, fusion) = match (&self.fusion, z_v, z_t) {
            (Some(f), Some(v), Some(t)) => {
                let out = f.forward(g, store, v, t, noise)?;
                (out.fused, Some(out))
            }
            (None, Some(v), None) => (v, None),
            (None, None, Some(t)) => (t, None),
            _ => return Err(Error::Contract("model modalities and encoders disagree".into())),
        };
        let mut parts = vec![repr];
        if self.config.uses_entity_tuple() {
            parts.push(self.tuple_embedding(g, store, s)?);
        }
        if let Some(e) = &s.entity {
            parts.push(g.constant(Tensor::vector(e))?);
        }
        let input = if parts.len() == 1 { repr } else { g.concat(&parts, 0)? };
        let probs = self.classifier.forward(g, store, input)?;
        Ok(Forward { probs, z_v, z_t, fusion })
    }

    /// Main objective `J_C + λ·J_F` averaged over `batch`.
    pub fn objective(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        batch: &[&PreparedSample],
        noise: &mut NoiseSource<'_>,
        settings: ObjectiveSettings<'_>,
    ) -> Result<Objective> {
        if batch.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        let mut ce_terms = Vec::with_capacity(batch.len());
        let mut recon_terms = Vec::new();
        let mut fakes_t = Vec::new();
        let mut fakes_v = Vec::new();
        for s in batch {
            let f = self.forward(g, store, s, noise)?;
            let w = settings.class_weights.map_or(1.0, |w| w[s.label]);
            ce_terms.push(cross_entropy_var(g, f.probs, s.label, w)?);
            if let Some(out) = f.fusion {
                if let (Some((z, zh)), Some(Fusion::Auto(auto))) = (out.reconstruction, &self.fusion) {
                    let term = if settings.fusion_to_encoders {
                        reconstruction_loss(g, z, zh)?
                    } else {
                        let (zv, zt) = (f.z_v.expect("fused"), f.z_t.expect("fused"));
                        let (zv, zt) = (g.detach(zv), g.detach(zt));
                        let out = auto.forward(g, store, zv, zt)?;
                        reconstruction_loss(g, out.joint, out.reconstruction)?
                    };
                    recon_terms.push(term);
                }
                if let (Some((gt, gv)), Some(Fusion::Gan(gan))) = (out.generated, &self.fusion) {
                    if settings.fusion_to_encoders {
                        fakes_t.push(gt);
                        fakes_v.push(gv);
                    } else {
                        let (zv, zt) = (f.z_v.expect("fused"), f.z_t.expect("fused"));
                        let zt = g.detach(zt);
                        let zv = g.detach(zv);
                        fakes_t.push(gan.text.generate(g, store, zt, noise)?);
                        fakes_v.push(gan.visual.generate(g, store, zv, noise)?);
                    }
                }
            }
        }
        let classification = mean_of(g, &ce_terms)?;
        let fusion = if !recon_terms.is_empty() {
            Some(mean_of(g, &recon_terms)?)
        } else if let (false, Some(Fusion::Gan(gan))) = (fakes_t.is_empty(), &self.fusion) {
            let a = gan.text.generator_objective(g, store, &fakes_t, settings.generator_loss)?;
            let b = gan.visual.generator_objective(g, store, &fakes_v, settings.generator_loss)?;
            Some(g.add(a, b)?)
        } else {
            None
        };
        let total = match fusion {
            Some(jf) if settings.lambda != 0.0 => {
                let weighted = g.scale(jf, settings.lambda)?;
                g.add(classification, weighted)?
            }
            _ => classification,
        };
        Ok(Objective {
            total,
            classification,
            fusion,
        })
    }

    /// `J_adv = J_adv^t + J_adv^v` over `batch`. Errors unless the model uses GAN-Fusion.
    pub fn adversarial_objective(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        batch: &[&PreparedSample],
        noise: &mut NoiseSource<'_>,
    ) -> Result<AdversarialObjective> {
        let Some(Fusion::Gan(gan)) = &self.fusion else {
            return Err(Error::Contract("adversarial objective needs GAN-Fusion".into()));
        };
        let (mut real_v, mut real_t, mut fake_t, mut fake_v) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for s in batch {
            let (zv, zt) = self.latents(g, store, s)?;
            let (zv, zt) = (zv.expect("fused model"), zt.expect("fused model"));
            fake_t.push(gan.text.generate(g, store, zt, noise)?);
            fake_v.push(gan.visual.generate(g, store, zv, noise)?);
            real_v.push(zv);
            real_t.push(zt);
        }
        // GAN_t imitates z_v from z_t; GAN_v imitates z_t from z_v
        let text = gan.text.adversarial_objective(g, store, &real_v, &fake_t)?.objective;
        let visual = gan.visual.adversarial_objective(g, store, &real_t, &fake_v)?.objective;
        let total = g.add(text, visual)?;
        Ok(AdversarialObjective { total, text, visual })
    }

    /// Class distribution for one prepared sample, with generator noise at its mean.
    pub fn predict_prepared(&self, s: &PreparedSample) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let f = self.forward(&mut g, &self.store, s, &mut None)?;
        Ok(g.value(f.probs).data().to_vec())
    }
}

/// Knobs of [`FusionModel::objective`].
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveSettings<'a> {
    pub lambda: f64,
    pub generator_loss: GeneratorLoss,
    /// Let `J_F` reach the encoders; otherwise it trains fusion parameters only.
    pub fusion_to_encoders: bool,
    pub class_weights: Option<&'a [f64]>,
}

impl Default for ObjectiveSettings<'_> {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            generator_loss: GeneratorLoss::NonSaturating,
            fusion_to_encoders: true,
            class_weights: None,
        }
    }
}

/// `−w · log y[label]` on the tape, with `y` clamped away from zero.
pub fn cross_entropy_var(g: &mut Graph, probs: Var, label: usize, weight: f64) -> Result<Var> {
    let p = g.slice(probs, 0, label, 1)?;
    let l = g.log_clamped(p, LOG_EPSILON)?;
    g.scale(l, -weight)
}

/// `J_C = −Σ_l t(l) log y(l)` with `y` clamped to at least `1e-12`.
pub fn cross_entropy(t: &[f64], y: &[f64]) -> Result<f64> {
    if t.len() != y.len() {
        return Err(Error::dim("cross_entropy", &[t.len()], &[y.len()]));
    }
    if y.iter().chain(t).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain {
            op: "cross_entropy",
            detail: "distributions must be finite and non-negative".into(),
        });
    }
    Ok(0.0
        - t.iter()
        .zip(y)
        .filter(|(ti, _)| **ti != 0.0)
        .map(|(ti, yi)| ti * yi.max(LOG_EPSILON).ln())
        .sum::<f64>())
}

fn mean_of(g: &mut Graph, terms: &[Var]) -> Result<Var> {
    let flat = terms.iter().map(|&t| g.reshape(t, &[1])).collect::<Result<Vec<_>>>()?;
    let all = g.concat(&flat, 0)?;
    g.mean(all)
}
