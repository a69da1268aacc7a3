use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{FusionModel, ObjectiveSettings, PreparedSample};
use super::optim::{Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, GeneratorLoss};
use crate::numcore::{Graph, ParamId};

fn default_epochs() -> usize {
    10
}
fn default_batch() -> usize {
    32
}
fn default_lambda() -> f64 {
    1.0
}
fn default_k() -> usize {
    1
}
fn default_clip() -> Option<f64> {
    Some(5.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Defaults to 1e-2 for SGD and 1e-3 for Adam.
    #[serde(default)]
    pub learning_rate: Option<f64>,
    /// Discriminator rate; defaults to `learning_rate`.
    #[serde(default)]
    pub discriminator_learning_rate: Option<f64>,
    /// Weight of the fusion term in `J = J_C + λ·J_F`.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Discriminator updates per generator update.
    #[serde(default = "default_k")]
    pub discriminator_steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gradient-norm cap on the recurrent text encoder; `None` disables clipping.
    #[serde(default = "default_clip")]
    pub clip_norm: Option<f64>,
    /// Per-class loss weights, off by default.
    #[serde(default)]
    pub class_weights: Option<Vec<f64>>,
    /// Stop after this many main updates.
    #[serde(default)]
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            optimizer: OptimizerKind::default(),
            learning_rate: None,
            discriminator_learning_rate: None,
            lambda: default_lambda(),
            discriminator_steps: default_k(),
            seed: 0,
            clip_norm: default_clip(),
            class_weights: None,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or_else(|| self.optimizer.default_learning_rate())
    }

    pub fn discriminator_learning_rate(&self) -> f64 {
        self.discriminator_learning_rate.unwrap_or_else(|| self.learning_rate())
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1".into());
        }
        for (name, lr) in [("learning_rate", self.learning_rate()), ("discriminator_learning_rate", self.discriminator_learning_rate())] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.discriminator_steps == 0 {
            return bad("discriminator_steps must be at least 1".into());
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad(format!("clip_norm must be positive, got {c}"));
            }
        }
        if let Some(w) = &self.class_weights {
            if w.len() != num_classes || w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return bad(format!("class_weights needs {num_classes} non-negative values"));
            }
        }
        Ok(())
    }
}

/// Losses recorded at one main update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub step: usize,
    /// Classification loss `J_C`.
    pub j_c: f64,
    /// `J_auto` for Auto-Fusion; `J_adv = J_adv^t + J_adv^v` from the last discriminator pass for GAN-Fusion.
    pub j_f: f64,
    /// The minimised total `J_C + λ·(fusion term)`.
    pub j: f64,
    /// Generator-side adversarial term (GAN-Fusion only).
    pub generator_term: Option<f64>,
    pub adv_text: Option<f64>,
    pub adv_visual: Option<f64>,
}

/// `step,J_C,J_F,J` with one row per report.
pub fn loss_csv(reports: &[LossReport]) -> String {
    let mut out = String::from("step,J_C,J_F,J\n");
    for r in reports {
        writeln!(out, "{},{},{},{}", r.step, r.j_c, r.j_f, r.j).unwrap();
    }
    out
}

/// Alternating minimax trainer. Discriminator and main updates are separate
/// public steps so that each can be audited on its own.
pub struct Trainer<'m> {
    pub model: &'m mut FusionModel,
    pub config: TrainConfig,
    rng: ChaCha8Rng,
    main_opt: Optimizer,
    disc_opt: Optimizer,
    step: usize,
    last_adv: Option<(f64, f64)>,
    pub log: Vec<LossReport>,
}

/// Seed offset separating the training stream from model initialisation.
const TRAIN_STREAM: u64 = 0x7472_6169_6e00;

impl<'m> Trainer<'m> {
    pub fn new(model: &'m mut FusionModel, config: TrainConfig) -> Result<Self> {
        config.validate(model.labels.len())?;
        let main_opt = Optimizer::new(config.optimizer, config.learning_rate());
        let disc_opt = Optimizer::new(config.optimizer, config.discriminator_learning_rate());
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ TRAIN_STREAM),
            model,
            config,
            main_opt,
            disc_opt,
            step: 0,
            last_adv: None,
            log: Vec::new(),
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    fn settings<'a>(model: &FusionModel, config: &'a TrainConfig) -> ObjectiveSettings<'a> {
        let (generator_loss, fusion_to_encoders) = match model.config.fusion {
            FusionConfig::Gan {
                generator_loss,
                adversarial_to_encoders,
                ..
            } => (generator_loss, adversarial_to_encoders),
            FusionConfig::Auto {
                reconstruction_to_encoders, ..
            } => (GeneratorLoss::NonSaturating, reconstruction_to_encoders),
            FusionConfig::Concat { .. } => (GeneratorLoss::NonSaturating, true),
        };
        ObjectiveSettings {
            lambda: config.lambda,
            generator_loss,
            fusion_to_encoders,
            class_weights: config.class_weights.as_deref(),
        }
    }

    fn diverged(&self, e: Error) -> Error {
        match e {
            Error::NonFinite { op } => Error::Divergence {
                step: self.step,
                detail: format!("non-finite value in {op}"),
            },
            other => other,
        }
    }

    fn check(&self, name: &str, v: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Divergence {
                step: self.step,
                detail: format!("{name} = {v}"),
            })
        }
    }

    /// One ascent update of `J_adv` touching only discriminator parameters.
    /// Returns the pre-update `(J_adv^t, J_adv^v)`.
    pub fn discriminator_step(&mut self, batch: &[&PreparedSample]) -> Result<(f64, f64)> {
        let disc: Vec<ParamId> = self.model.discriminator_params();
        if disc.is_empty() {
            return Err(Error::Contract("discriminator step on a model without discriminators".into()));
        }
        self.model.store.set_trainable(&disc);
        let result = (|| {
            let mut g = Graph::new();
            let adv = self
                .model
                .adversarial_objective(&mut g, &self.model.store, batch, &mut Some(&mut self.rng))?;
            let neg = g.neg(adv.total)?;
            g.backward(neg)?;
            Ok((g, adv))
        })();
        let (g, adv) = match result {
            Ok(v) => v,
            Err(e) => {
                self.model.store.set_all_trainable();
                return Err(self.diverged(e));
            }
        };
        let terms = (g.scalar(adv.text), g.scalar(adv.visual));
        self.check("J_adv", terms.0 + terms.1)?;
        g.export_param_grads(&mut self.model.store);
        self.disc_opt.step(&mut self.model.store, &disc);
        self.model.store.set_all_trainable();
        self.last_adv = Some(terms);
        Ok(terms)
    }

    /// One descent update of `J_C + λ·J_F` on every non-discriminator parameter.
    pub fn generator_step(&mut self, batch: &[&PreparedSample]) -> Result<LossReport> {
        let main = self.model.main_params();
        self.model.store.set_trainable(&main);
        let settings = Self::settings(self.model, &self.config);
        let result = (|| {
            let mut g = Graph::new();
            let obj = self
                .model
                .objective(&mut g, &self.model.store, batch, &mut Some(&mut self.rng), settings)?;
            g.backward(obj.total)?;
            Ok((g, obj))
        })();
        let (g, obj) = match result {
            Ok(v) => v,
            Err(e) => {
                self.model.store.set_all_trainable();
                return Err(self.diverged(e));
            }
        };
        let j_c = self.check("J_C", g.scalar(obj.classification))?;
        let j = self.check("J", g.scalar(obj.total))?;
        let fusion_term = obj.fusion.map(|v| g.scalar(v));
        g.export_param_grads(&mut self.model.store);
        if let Some(c) = self.config.clip_norm {
            let rec = self.model.recurrent_params();
            self.model.store.clip_grad_norm(&rec, c);
        }
        self.main_opt.step(&mut self.model.store, &main);
        self.model.store.set_all_trainable();
        let gan = self.model.is_gan();
        let report = LossReport {
            step: self.step,
            j_c,
            j_f: if gan {
                self.last_adv.map_or(0.0, |(t, v)| t + v)
            } else {
                fusion_term.unwrap_or(0.0)
            },
            j,
            generator_term: if gan { fusion_term } else { None },
            adv_text: if gan { self.last_adv.map(|a| a.0) } else { None },
            adv_visual: if gan { self.last_adv.map(|a| a.1) } else { None },
        };
        self.step += 1;
        self.log.push(report);
        Ok(report)
    }

    /// `k` discriminator updates (GAN-Fusion only), then one main update.
    pub fn train_batch(&mut self, batch: &[&PreparedSample]) -> Result<LossReport> {
        if self.model.is_gan() {
            for _ in 0..self.config.discriminator_steps {
                self.discriminator_step(batch)?;
            }
        }
        self.generator_step(batch)
    }

    /// Runs the configured epochs over `samples`, reshuffling each epoch.
    pub fn fit(&mut self, samples: &[PreparedSample]) -> Result<&[LossReport]> {
        if samples.is_empty() {
            return Err(Error::Input("no training samples".into()));
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        'epochs: for _ in 0..self.config.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.config.batch_size) {
                if self.config.max_steps.is_some_and(|m| self.step >= m) {
                    break 'epochs;
                }
                let batch: Vec<&PreparedSample> = chunk.iter().map(|&i| &samples[i]).collect();
                self.train_batch(&batch)?;
            }
        }
        Ok(&self.log)
    }
}
