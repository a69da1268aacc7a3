use std::sync::Arc;

use super::*;
use crate::datakit::{generate_synthetic, Dataset, LabelSpace, SyntheticSpec, SyntheticTask, Visual};
use crate::error::Error;
use crate::fusion::{FusionConfig, GeneratorLoss};
use crate::numcore::{grad_check_params, Graph};
use crate::textprep::Lexicons;

fn toy_data(n: usize, seed: u64) -> Dataset {
    let spec = SyntheticSpec {
        grid_size: 6,
        ..SyntheticSpec::new(SyntheticTask::XorCrossmodal, n, seed)
    };
    generate_synthetic(&spec).unwrap().dataset
}

fn toy_config(fusion: FusionConfig) -> ModelConfig {
    ModelConfig {
        latent_dim: 4,
        text: TextSection { embed_dim: 4, hidden_dim: 3 },
        visual: VisualSection::Conv { channels: 1, conv_channels: [2, 2] },
        fusion,
        ..ModelConfig::default()
    }
}

fn lexicons() -> Arc<Lexicons> {
    Arc::new(Lexicons::bundled().clone())
}

fn toy_model(fusion: FusionConfig, data: &Dataset, seed: u64) -> FusionModel {
    build_model(toy_config(fusion), data, lexicons(), seed).unwrap()
}

#[test]
fn cross_entropy_values() {
    assert_eq!(cross_entropy(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    assert!((cross_entropy(&[0.0, 1.0], &[0.5, 0.5]).unwrap() - 0.693147).abs() < 1e-6);
    assert!((cross_entropy(&[0.0, 1.0, 0.0], &[1.0 / 3.0; 3]).unwrap() - 3f64.ln()).abs() < 1e-12);
    assert!((cross_entropy(&[1.0, 0.0], &[0.8, 0.2]).unwrap() - 0.223144).abs() < 1e-6);
    assert!((cross_entropy(&[1.0, 0.0], &[0.8, 0.2]).unwrap() + 0.8f64.ln()).abs() < 1e-15);
    assert!(matches!(cross_entropy(&[1.0], &[0.5, 0.5]), Err(Error::Dimension { .. })));
    assert!(cross_entropy(&[1.0, 0.0], &[0.0, 1.0]).unwrap().is_finite());
}

#[test]
fn zero_classifier_gives_uniform_distribution() {
    let data = toy_data(10, 1);
    let mut model = toy_model(FusionConfig::gan(), &data, 0);
    let (w, b) = (model.classifier.weight, model.classifier.bias);
    let n = model.store.get(w).numel();
    model.store.set_value(w, &vec![0.0; n]).unwrap();
    model.store.set_value(b, &[0.0, 0.0]).unwrap();
    let p = predict(&model, &data.publications[0]).unwrap();
    assert_eq!(p.distribution, vec![0.5, 0.5]);
    assert_eq!(p.label, 0);
}

#[test]
fn argmax_ignores_a_shared_logit_shift() {
    let data = toy_data(10, 2);
    let mut model = toy_model(FusionConfig::auto(), &data, 1);
    let before: Vec<usize> = data.publications.iter().map(|p| predict(&model, p).unwrap().label).collect();
    let b = model.classifier.bias;
    let shifted: Vec<f64> = model.store.get(b).data().iter().map(|v| v + 3.5).collect();
    model.store.set_value(b, &shifted).unwrap();
    let after: Vec<usize> = data.publications.iter().map(|p| predict(&model, p).unwrap().label).collect();
    assert_eq!(before, after);
}

#[test]
fn missing_modality_is_an_input_error() {
    let data = toy_data(4, 3);
    let model = toy_model(FusionConfig::concat(), &data, 0);
    let mut p = data.publications[0].clone();
    p.visual = None;
    assert!(matches!(predict(&model, &p), Err(Error::Input(_))));
    let mut p = data.publications[0].clone();
    p.text.clear();
    assert!(matches!(predict(&model, &p), Err(Error::Input(_))));
    let mut p = data.publications[0].clone();
    p.visual = Some(Visual::Features(vec![1.0; 4]));
    assert!(matches!(predict(&model, &p), Err(Error::Input(_))));
}

#[test]
fn save_load_round_trip() {
    let data = toy_data(10, 4);
    let mut model = toy_model(FusionConfig::gan(), &data, 5);
    let samples = prepare_all(&model, &data).unwrap();
    let mut t = Trainer::new(&mut model, TrainConfig { epochs: 1, batch_size: 5, ..TrainConfig::default() }).unwrap();
    t.fit(&samples).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.fuselab");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    let bits = |m: &FusionModel| m.store.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&model), bits(&loaded));
    assert_eq!(loaded.vocab, model.vocab);
    assert_eq!(loaded.labels, model.labels);
    for p in &data.publications {
        assert_eq!(predict(&model, p).unwrap(), predict(&loaded, p).unwrap());
    }

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    let err = load_model(&path).unwrap_err();
    assert!(matches!(err, Error::Format(ref m) if m.contains("checksum")), "{err}");

    // a well-formed file from a future version
    let mut future = model_to_bytes(&model);
    future[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    let n = future.len();
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(&future[..n - 32]);
    future[n - 32..].copy_from_slice(&digest);
    assert!(matches!(model_from_bytes(&future), Err(Error::Format(ref m)) if m.contains("version")));
}

#[test]
fn lambda_zero_concat_is_classifier_only() {
    let data = toy_data(16, 6);
    let mut model = toy_model(FusionConfig::concat(), &data, 0);
    let samples = prepare_all(&model, &data).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 4, lambda: 0.0, ..TrainConfig::default() };
    let mut t = Trainer::new(&mut model, cfg).unwrap();
    for r in t.fit(&samples).unwrap() {
        assert_eq!(r.j, r.j_c);
        assert_eq!(r.j_f, 0.0);
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let run = |fusion| {
        let data = toy_data(24, 7);
        let mut model = toy_model(fusion, &data, 11);
        let samples = prepare_all(&model, &data).unwrap();
        let cfg = TrainConfig { epochs: 2, batch_size: 6, seed: 11, ..TrainConfig::default() };
        let mut t = Trainer::new(&mut model, cfg).unwrap();
        let log: Vec<[u64; 3]> = t
            .fit(&samples)
            .unwrap()
            .iter()
            .map(|r| [r.j_c.to_bits(), r.j_f.to_bits(), r.j.to_bits()])
            .collect();
        (log, model.store.flatten())
    };
    for fusion in [FusionConfig::gan(), FusionConfig::auto(), FusionConfig::concat()] {
        assert_eq!(run(fusion), run(fusion));
    }
}

#[test]
fn parameter_partition_holds_every_step() {
    let data = toy_data(40, 8);
    let mut model = toy_model(FusionConfig::gan(), &data, 2);
    let disc = model.discriminator_params();
    let main = model.main_params();
    assert!(!disc.is_empty() && !main.is_empty());
    let samples = prepare_all(&model, &data).unwrap();
    let mut t = Trainer::new(&mut model, TrainConfig { batch_size: 8, ..TrainConfig::default() }).unwrap();
    let batch: Vec<&PreparedSample> = samples.iter().take(8).collect();
    let values = |t: &Trainer, ids: &[crate::numcore::ParamId]| -> Vec<Vec<f64>> {
        ids.iter().map(|&id| t.model.store.get(id).data().to_vec()).collect()
    };
    for _ in 0..5 {
        let (d0, m0) = (values(&t, &disc), values(&t, &main));
        t.discriminator_step(&batch).unwrap();
        let (d1, m1) = (values(&t, &disc), values(&t, &main));
        assert_eq!(m0, m1, "discriminator step touched main parameters");
        assert_ne!(d0, d1);
        t.generator_step(&batch).unwrap();
        let (d2, m2) = (values(&t, &disc), values(&t, &main));
        assert_eq!(d1, d2, "main step touched discriminator parameters");
        assert_ne!(m1, m2);
    }
}

#[test]
fn full_pipeline_gradient_check() {
    let data = toy_data(3, 9);
    let mut cfg_tuple = toy_config(FusionConfig::concat());
    cfg_tuple.modes = InputModes::Text;
    let configs = [
        toy_config(FusionConfig::gan()),
        toy_config(FusionConfig::auto()),
        toy_config(FusionConfig::Gan {
            fuse_dim: None,
            noise_dim: None,
            include_latents: true,
            generator_loss: GeneratorLoss::Saturating,
            adversarial_to_encoders: true,
        }),
        cfg_tuple,
    ];
    // ReLU layers make the objective piecewise smooth; these seeds keep every
    // pre-activation well clear of zero at the check point
    for (cfg, seed) in configs.into_iter().flat_map(|c| (0..3).map(move |s| (c.clone(), s))) {
        let mut model = build_model(cfg.clone(), &data, lexicons(), seed).unwrap();
        // zero biases put ReLU units exactly on their kink when a latent is all zeros
        let ids: Vec<_> = model.store.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            if model.store.name(id).ends_with("bias") {
                let v: Vec<f64> = (0..model.store.get(id).numel()).map(|j| 0.1 * ((k * 7 + j) as f64).sin()).collect();
                model.store.set_value(id, &v).unwrap();
            }
        }
        let samples = prepare_all(&model, &data).unwrap();
        let batch: Vec<&PreparedSample> = samples.iter().collect();
        let mut store = model.store.clone();
        let report = grad_check_params(
            &mut store,
            |g, s| {
                let mut j = model.objective(g, s, &batch, &mut None, ObjectiveSettings::default())?.total;
                if model.is_gan() {
                    let adv = model.adversarial_objective(g, s, &batch, &mut None)?.total;
                    j = g.add(j, adv)?;
                }
                Ok(j)
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "seed {seed} {cfg:?}: {}", report.max_rel_err);
    }
}

#[test]
fn fusion_loss_flow_to_encoders_can_be_cut() {
    let data = toy_data(4, 10);
    for fusion in [FusionConfig::gan(), FusionConfig::auto()] {
        let model = toy_model(fusion, &data, 4);
        let samples = prepare_all(&model, &data).unwrap();
        let batch: Vec<&PreparedSample> = samples.iter().collect();
        let grad_norms = |cut: bool| {
            let mut store = model.store.clone();
            let mut g = Graph::new();
            let settings = ObjectiveSettings { fusion_to_encoders: !cut, ..ObjectiveSettings::default() };
            let obj = model.objective(&mut g, &store, &batch, &mut None, settings).unwrap();
            g.backward(obj.fusion.unwrap()).unwrap();
            g.export_param_grads(&mut store);
            let mut encoders = model.recurrent_params();
            encoders.extend(model.visual.as_ref().unwrap().params());
            let fusion = model.fusion.as_ref().unwrap().params();
            (store.grad_norm(&encoders), store.grad_norm(&fusion))
        };
        let (enc, fus) = grad_norms(false);
        assert!(enc > 0.0 && fus > 0.0);
        let (enc, fus) = grad_norms(true);
        assert_eq!(enc, 0.0, "{fusion:?}");
        assert!(fus > 0.0);
    }
}

#[test]
fn auto_fusion_reconstruction_halves_within_200_steps() {
    let data = toy_data(64, 3);
    let mut model = toy_model(FusionConfig::auto(), &data, 3);
    let samples = prepare_all(&model, &data).unwrap();
    let cfg = TrainConfig { epochs: 100, batch_size: 16, seed: 3, max_steps: Some(200), ..TrainConfig::default() };
    let mut t = Trainer::new(&mut model, cfg).unwrap();
    let log = t.fit(&samples).unwrap();
    assert_eq!(log.len(), 200);
    let (first, last) = (log[0].j_f, log[199].j_f);
    assert!(last < 0.5 * first, "{first} -> {last}");
}

#[test]
fn divergence_reports_the_step() {
    let data = toy_data(8, 12);
    let mut model = toy_model(FusionConfig::concat(), &data, 0);
    let samples = prepare_all(&model, &data).unwrap();
    for id in model.main_params() {
        let n = model.store.get(id).numel();
        model.store.set_value(id, &vec![1e308; n]).unwrap();
    }
    let mut t = Trainer::new(&mut model, TrainConfig { batch_size: 4, ..TrainConfig::default() }).unwrap();
    let err = t.fit(&samples).unwrap_err();
    assert!(matches!(err, Error::Divergence { step: 0, .. }), "{err}");
}

#[test]
fn config_validation() {
    let data = toy_data(4, 0);
    let mut model = toy_model(FusionConfig::concat(), &data, 0);
    for cfg in [
        TrainConfig { discriminator_steps: 0, ..TrainConfig::default() },
        TrainConfig { lambda: -1.0, ..TrainConfig::default() },
        TrainConfig { learning_rate: Some(0.0), ..TrainConfig::default() },
        TrainConfig { class_weights: Some(vec![1.0]), ..TrainConfig::default() },
    ] {
        assert!(matches!(Trainer::new(&mut model, cfg), Err(Error::Config(_))));
    }
    let other = Dataset::new(Vec::new(), LabelSpace::binary()).unwrap();
    assert!(matches!(evaluate(&model, &other, 1), Err(Error::Input(_))));
    let mut relabeled = data.clone();
    relabeled.labels = LabelSpace::binary();
    assert!(matches!(evaluate(&model, &relabeled, 1), Err(Error::Config(_))));
}

#[test]
fn threaded_evaluation_matches_serial() {
    let data = toy_data(30, 13);
    let model = toy_model(FusionConfig::gan(), &data, 1);
    let a = evaluate(&model, &data, 1).unwrap();
    let b = evaluate(&model, &data, 4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn loss_log_csv_columns() {
    let r = LossReport { step: 3, j_c: 0.5, j_f: -1.25, j: 0.75, generator_term: None, adv_text: None, adv_visual: None };
    assert_eq!(loss_csv(&[r]), "step,J_C,J_F,J\n3,0.5,-1.25,0.75\n");
}

#[test]
fn vocabulary_reserves_oov_and_empty() {
    let lex = Lexicons::bundled();
    let texts = [crate::textprep::normalize("a cat and a dog", lex)];
    let v = Vocabulary::build(&texts, 1);
    assert_eq!(v.token(OOV_ID), OOV_TOKEN);
    assert_eq!(v.token(EMPTY_ID), EMPTY_TOKEN);
    assert_eq!(v.token(2), "a");
    assert_eq!(v.id("zebra"), OOV_ID);
    assert_eq!(v.encode(&crate::textprep::normalize("", lex)), vec![EMPTY_ID]);
}


#[test]
fn gradient_suite_passes_at_default_tolerance() {
    let results = gradient_suite(1e-4).unwrap();
    assert!(results.len() >= 20);
    for r in &results {
        assert!(r.passed, "{}: {}", r.name, r.max_rel_err);
    }
}
