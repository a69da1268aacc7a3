//! A one-dimensional GAN whose source and target share one distribution.
//!
//! With matched distributions the generator can fool the discriminator
//! completely, so a trained discriminator should score held-out real and
//! generated samples at about chance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::fusion::{GanFusionModule, GeneratorLoss};
use crate::numcore::{Graph, ParamStore, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct GanToyConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub discriminator_steps: usize,
    pub noise_dim: usize,
    /// Mean and standard deviation shared by source and target.
    pub mean: f64,
    pub std: f64,
    pub held_out: usize,
    pub generator_loss: GeneratorLoss,
    pub seed: u64,
}

impl Default for GanToyConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 64,
            optimizer: OptimizerKind::Adam {
                beta1: 0.5,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            learning_rate: 2e-3,
            discriminator_steps: 1,
            noise_dim: 1,
            mean: 0.0,
            std: 1.0,
            held_out: 2000,
            generator_loss: GeneratorLoss::NonSaturating,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanToyReport {
    /// Held-out accuracy of `D > 0.5` on an equal mix of real and generated samples.
    pub discriminator_accuracy: f64,
    pub initial_discriminator_accuracy: f64,
    pub fake_mean: f64,
    pub fake_std: f64,
    /// `J_adv` of each discriminator step.
    pub adversarial_curve: Vec<f64>,
}

fn draws(rng: &mut ChaCha8Rng, dist: &Normal<f64>, n: usize) -> Vec<f64> {
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn held_out_accuracy(
    m: &GanFusionModule,
    store: &ParamStore,
    rng: &mut ChaCha8Rng,
    dist: &Normal<f64>,
    n: usize,
) -> Result<(f64, f64, f64)> {
    let mut correct = 0usize;
    let mut fakes = Vec::with_capacity(n);
    for _ in 0..n {
        let mut g = Graph::new();
        let real = g.constant(Tensor::vector(&[dist.sample(rng)]))?;
        let src = g.constant(Tensor::vector(&[dist.sample(rng)]))?;
        let fake = m.generate(&mut g, store, src, &mut Some(&mut *rng))?;
        let dr = m.discriminate(&mut g, store, real)?;
        let df = m.discriminate(&mut g, store, fake)?;
        correct += usize::from(g.scalar(dr) > 0.5) + usize::from(g.scalar(df) <= 0.5);
        fakes.push(g.scalar(fake));
    }
    let mean = fakes.iter().sum::<f64>() / n as f64;
    let var = fakes.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n as f64;
    Ok((correct as f64 / (2 * n) as f64, mean, var.sqrt()))
}

/// Trains the toy with alternating discriminator and generator Adam steps.
pub fn train_gan_toy(config: &GanToyConfig) -> Result<GanToyReport> {
    if config.batch_size == 0 || config.held_out == 0 || config.discriminator_steps == 0 {
        return Err(Error::Config("batch_size, held_out and discriminator_steps must be positive".into()));
    }
    let dist = Normal::new(config.mean, config.std).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut store = ParamStore::new();
    let m = GanFusionModule::new(&mut store, "toy", 1, config.noise_dim, &mut rng);
    let (disc, gen) = (m.discriminator_params(), m.generator_params());
    let kind = config.optimizer;
    let mut d_opt = Optimizer::new(kind, config.learning_rate);
    let mut g_opt = Optimizer::new(kind, config.learning_rate);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let initial = held_out_accuracy(&m, &store, &mut eval_rng.clone(), &dist, config.held_out)?.0;

    let b = config.batch_size;
    let mut curve = Vec::with_capacity(config.steps * config.discriminator_steps);
    for _ in 0..config.steps {
        for _ in 0..config.discriminator_steps {
            store.set_trainable(&disc);
            let reals = draws(&mut rng, &dist, b);
            let sources = draws(&mut rng, &dist, b);
            let mut g = Graph::new();
            let mut rs = Vec::with_capacity(b);
            let mut fs = Vec::with_capacity(b);
            for (r, s) in reals.iter().zip(&sources) {
                rs.push(g.constant(Tensor::vector(&[*r]))?);
                let s = g.constant(Tensor::vector(&[*s]))?;
                fs.push(m.generate(&mut g, &store, s, &mut Some(&mut rng))?);
            }
            let adv = m.adversarial_objective(&mut g, &store, &rs, &fs)?.objective;
            curve.push(g.scalar(adv));
            let loss = g.neg(adv)?;
            g.backward(loss)?;
            g.export_param_grads(&mut store);
            d_opt.step(&mut store, &disc);
        }
        store.set_trainable(&gen);
        let sources = draws(&mut rng, &dist, b);
        let mut g = Graph::new();
        let mut fs = Vec::with_capacity(b);
        for s in &sources {
            let s = g.constant(Tensor::vector(&[*s]))?;
            fs.push(m.generate(&mut g, &store, s, &mut Some(&mut rng))?);
        }
        let loss = m.generator_objective(&mut g, &store, &fs, config.generator_loss)?;
        g.backward(loss)?;
        g.export_param_grads(&mut store);
        g_opt.step(&mut store, &gen);
    }
    store.set_all_trainable();
    let (acc, fake_mean, fake_std) = held_out_accuracy(&m, &store, &mut eval_rng, &dist, config.held_out)?;
    Ok(GanToyReport {
        discriminator_accuracy: acc,
        initial_discriminator_accuracy: initial,
        fake_mean,
        fake_std,
        adversarial_curve: curve,
    })
}
