//! The finite-difference gradient suite behind `fuselab gradcheck`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{build_model, cross_entropy_var, prepare_all, FusionModel, InputModes, ModelConfig, ObjectiveSettings, PreparedSample, TextSection, VisualSection};
use crate::datakit::{generate_synthetic, SyntheticSpec, SyntheticTask};
use crate::error::Result;
use crate::fusion::{reconstruction_loss, Fusion, FusionConfig, GanFusionModule, GeneratorLoss};
use crate::layers::{Activation, DenseLayer, EmbeddingTable, LstmCell, RecurrentTextEncoder, TextEncoderConfig, VisualEncoder, VisualEncoderConfig};
use crate::numcore::{grad_check, grad_check_params, CheckReport, ParamStore, Tensor};
use crate::textprep::Lexicons;

/// Finite-difference step used by the suite.
pub const GRADCHECK_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckResult {
    pub name: String,
    pub max_rel_err: f64,
    pub passed: bool,
}

fn record(out: &mut Vec<GradCheckResult>, name: impl Into<String>, r: CheckReport) {
    out.push(GradCheckResult {
        name: name.into(),
        max_rel_err: r.max_rel_err,
        passed: r.passed,
    });
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Moves every bias off zero so ReLU units do not start on their kink.
fn jitter_biases(store: &mut ParamStore) -> Result<()> {
    let ids: Vec<_> = store.ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        if store.name(id).ends_with("bias") {
            let v: Vec<f64> = (0..store.get(id).numel()).map(|j| 0.1 * ((k * 7 + j) as f64).sin()).collect();
            store.set_value(id, &v)?;
        }
    }
    Ok(())
}

fn layer_checks(tol: f64, out: &mut Vec<GradCheckResult>) -> Result<()> {
    let h = GRADCHECK_STEP;
    for act in [Activation::Identity, Activation::Sigmoid, Activation::Tanh, Activation::Relu, Activation::Softmax] {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut store = ParamStore::new();
        let layer = DenseLayer::new(&mut store, "dense", 4, 3, act, &mut rng);
        jitter_biases(&mut store)?;
        let x = random_tensor(&mut rng, &[4]);
        let w = random_tensor(&mut rng, &[3]);
        let r = grad_check_params(
            &mut store,
            |g, s| {
                let xv = g.constant(x.clone())?;
                let y = layer.forward(g, s, xv)?;
                let wv = g.constant(w.clone())?;
                let p = g.mul(y, wv)?;
                g.sum(p)
            },
            h,
            tol,
        )?;
        record(out, format!("dense/{}", format!("{act:?}").to_lowercase()), r);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let table = EmbeddingTable::new(&mut store, "embed", 6, 4, 0, &mut rng);
    let w = random_tensor(&mut rng, &[3, 4]);
    let r = grad_check_params(
        &mut store,
        |g, s| {
            let e = table.lookup(g, s, &[1, 4, 1])?;
            let wv = g.constant(w.clone())?;
            let p = g.mul(e, wv)?;
            g.sum(p)
        },
        h,
        tol,
    )?;
    record(out, "embedding", r);

    let mut store = ParamStore::new();
    let cell = LstmCell::new(&mut store, "lstm", 3, 4, &mut rng);
    jitter_biases(&mut store)?;
    let (x, h0, c0) = (random_tensor(&mut rng, &[3]), random_tensor(&mut rng, &[4]), random_tensor(&mut rng, &[4]));
    let r = grad_check_params(
        &mut store,
        |g, s| {
            let x = g.constant(x.clone())?;
            let h0 = g.constant(h0.clone())?;
            let c0 = g.constant(c0.clone())?;
            let (h1, c1) = cell.step(g, s, x, h0, c0)?;
            let (h2, _) = cell.step(g, s, x, h1, c1)?;
            g.squared_norm(h2)
        },
        h,
        tol,
    )?;
    record(out, "lstm_cell", r);

    let mut store = ParamStore::new();
    let config = TextEncoderConfig {
        vocab_size: 12,
        embed_dim: 5,
        hidden_dim: 3,
        latent_dim: 4,
    };
    let enc = RecurrentTextEncoder::new(&mut store, "text", config, &mut rng);
    jitter_biases(&mut store)?;
    for len in [1, 6] {
        let tokens: Vec<usize> = (0..len).map(|_| rng.random_range(0..12)).collect();
        let r = grad_check_params(
            &mut store,
            |g, s| {
                let e = enc.encode(g, s, &tokens)?;
                g.squared_norm(e.latent)
            },
            h,
            tol,
        )?;
        record(out, format!("text_encoder/len{len}"), r);
    }

    let configs = [
        VisualEncoderConfig::Conv {
            channels: 1,
            conv_channels: [3, 2],
            latent_dim: 4,
        },
        VisualEncoderConfig::Features {
            feature_dim: 6,
            latent_dim: 4,
        },
    ];
    for cfg in configs {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut store = ParamStore::new();
        let enc = VisualEncoder::new(&mut store, "visual", cfg, &mut rng);
        jitter_biases(&mut store)?;
        let (input, name) = match cfg {
            VisualEncoderConfig::Conv { .. } => (random_tensor(&mut rng, &[7, 8, 1]), "visual_encoder/conv"),
            VisualEncoderConfig::Features { .. } => (random_tensor(&mut rng, &[6]), "visual_encoder/features"),
        };
        let r = grad_check_params(
            &mut store,
            |g, s| {
                let x = g.constant(input.clone())?;
                let z = enc.encode(g, s, x)?;
                g.squared_norm(z)
            },
            h,
            tol,
        )?;
        record(out, name, r);
    }
    Ok(())
}

fn loss_checks(tol: f64, out: &mut Vec<GradCheckResult>) -> Result<()> {
    let h = GRADCHECK_STEP;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let logits = random_tensor(&mut rng, &[3]);
    let r = grad_check(
        |g, x| {
            let p = g.softmax(x)?;
            cross_entropy_var(g, p, 1, 1.0)
        },
        &logits,
        h,
        tol,
    )?;
    record(out, "cross_entropy", r);

    let fusions = [
        ("concat", FusionConfig::Concat {
            projection_dim: Some(3),
            projection_activation: Activation::Tanh,
        }),
        ("auto_fusion", FusionConfig::auto()),
        ("gan_fusion", FusionConfig::gan()),
    ];
    for (name, cfg) in fusions {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let f = Fusion::new(&mut store, "fusion", 4, cfg, &mut rng)?;
        jitter_biases(&mut store)?;
        let zv = store.add("zv", random_tensor(&mut rng, &[4]));
        let zt = store.add("zt", random_tensor(&mut rng, &[4]));
        let r = grad_check_params(
            &mut store,
            |g, s| {
                let v = g.param(s, zv);
                let t = g.param(s, zt);
                let o = f.forward(g, s, v, t, &mut None)?;
                let mut loss = g.squared_norm(o.fused)?;
                if let Some((z, zh)) = o.reconstruction {
                    let j = reconstruction_loss(g, z, zh)?;
                    loss = g.add(loss, j)?;
                }
                if let (Fusion::Gan(gan), Some((gt, gv))) = (&f, o.generated) {
                    let at = gan.text.adversarial_objective(g, s, &[v], &[gt])?.objective;
                    let av = gan.visual.adversarial_objective(g, s, &[t], &[gv])?.objective;
                    loss = g.add(loss, at)?;
                    loss = g.add(loss, av)?;
                }
                Ok(loss)
            },
            h,
            tol,
        )?;
        record(out, format!("fusion/{name}"), r);
    }

    for form in [GeneratorLoss::NonSaturating, GeneratorLoss::Saturating] {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut store = ParamStore::new();
        let m = GanFusionModule::new(&mut store, "gan", 4, 1, &mut rng);
        jitter_biases(&mut store)?;
        let reals: Vec<Tensor> = (0..3).map(|_| random_tensor(&mut rng, &[4])).collect();
        let sources: Vec<Tensor> = (0..3).map(|_| random_tensor(&mut rng, &[4])).collect();
        let r = grad_check_params(
            &mut store,
            |g, s| {
                let mut rs = Vec::new();
                let mut fs = Vec::new();
                for (real, src) in reals.iter().zip(&sources) {
                    rs.push(g.constant(real.clone())?);
                    let src = g.constant(src.clone())?;
                    fs.push(m.generate(g, s, src, &mut None)?);
                }
                let adv = m.adversarial_objective(g, s, &rs, &fs)?.objective;
                let gen = m.generator_objective(g, s, &fs, form)?;
                g.add(adv, gen)
            },
            h,
            tol,
        )?;
        let form = match form {
            GeneratorLoss::NonSaturating => "non_saturating",
            GeneratorLoss::Saturating => "saturating",
        };
        record(out, format!("gan_objectives/{form}"), r);
    }
    Ok(())
}

/// Small end-to-end model at `d = 4` on a three-sample synthetic batch.
fn toy_model(fusion: FusionConfig, modes: InputModes, seed: u64) -> Result<(FusionModel, Vec<PreparedSample>)> {
    let spec = SyntheticSpec {
        grid_size: 6,
        ..SyntheticSpec::new(SyntheticTask::XorCrossmodal, 3, 9)
    };
    let data = generate_synthetic(&spec)?.dataset;
    let config = ModelConfig {
        latent_dim: 4,
        modes,
        text: TextSection { embed_dim: 4, hidden_dim: 3 },
        visual: VisualSection::Conv { channels: 1, conv_channels: [2, 2] },
        fusion,
        ..ModelConfig::default()
    };
    let mut model = build_model(config, &data, Arc::new(Lexicons::bundled().clone()), seed)?;
    jitter_biases(&mut model.store)?;
    let samples = prepare_all(&model, &data)?;
    Ok((model, samples))
}

fn end_to_end_checks(tol: f64, out: &mut Vec<GradCheckResult>) -> Result<()> {
    let cases = [
        ("concat", FusionConfig::concat(), InputModes::Both),
        ("auto_fusion", FusionConfig::auto(), InputModes::Both),
        ("gan_fusion", FusionConfig::gan(), InputModes::Both),
        ("text_only_tuple", FusionConfig::concat(), InputModes::Text),
        ("visual_only", FusionConfig::concat(), InputModes::Visual),
    ];
    for (name, fusion, modes) in cases {
        let (model, samples) = toy_model(fusion, modes, 0)?;
        let batch: Vec<&PreparedSample> = samples.iter().collect();
        let mut store = model.store.clone();
        let r = grad_check_params(
            &mut store,
            |g, s| {
                let mut j = model.objective(g, s, &batch, &mut None, ObjectiveSettings::default())?.total;
                if model.is_gan() {
                    let adv = model.adversarial_objective(g, s, &batch, &mut None)?.total;
                    j = g.add(j, adv)?;
                }
                Ok(j)
            },
            GRADCHECK_STEP,
            tol,
        )?;
        record(out, format!("end_to_end/{name}"), r);
    }
    Ok(())
}

/// Runs every gradient check at tolerance `tol`: each layer, cross-entropy,
/// both fusion losses and the joint objective of a full model.
pub fn gradient_suite(tol: f64) -> Result<Vec<GradCheckResult>> {
    let mut out = Vec::new();
    layer_checks(tol, &mut out)?;
    loss_checks(tol, &mut out)?;
    end_to_end_checks(tol, &mut out)?;
    Ok(out)
}
