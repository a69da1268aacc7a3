//! Trains a GAN-Fusion classifier, saves it, reloads it and checks that the
//! reloaded model predicts identically.

use std::sync::Arc;

use fuselab::datakit::{generate_synthetic, split_and_batch, SyntheticSpec, SyntheticTask};
use fuselab::fusion::FusionConfig;
use fuselab::metrics::render_per_class;
use fuselab::textprep::Lexicons;
use fuselab::training::{
    build_model, evaluate, load_model, predict, prepare_all, save_model, ModelConfig, TextSection, TrainConfig,
    Trainer, VisualSection,
};

fn main() {
    let data = generate_synthetic(&SyntheticSpec::new(SyntheticTask::UnimodalSeparable, 600, 3))
        .unwrap()
        .dataset;
    let split = split_and_batch(data.len(), [0.7, 0.0, 0.3], 16, 3).unwrap();
    let (train, test) = (data.subset(&split.train_indices()), data.subset(&split.test_indices()));

    let config = ModelConfig {
        latent_dim: 8,
        text: TextSection {
            embed_dim: 8,
            hidden_dim: 8,
        },
        visual: VisualSection::Conv {
            channels: 1,
            conv_channels: [4, 4],
        },
        fusion: FusionConfig::gan(),
        ..ModelConfig::default()
    };
    let mut model = build_model(config, &train, Arc::new(Lexicons::bundled().clone()), 3).unwrap();
    let samples = prepare_all(&model, &train).unwrap();
    let log = Trainer::new(
        &mut model,
        TrainConfig {
            epochs: 15,
            learning_rate: Some(5e-3),
            batch_size: 16,
            seed: 3,
            ..TrainConfig::default()
        },
    )
    .unwrap()
    .fit(&samples)
    .unwrap()
    .to_vec();
    let (first, last) = (&log[0], &log[log.len() - 1]);
    println!("{} steps, J_C {:.4} -> {:.4}, J_adv {:.4} -> {:.4}", log.len(), first.j_c, last.j_c, first.j_f, last.j_f);

    let (_, report) = evaluate(&model, &test, 2).unwrap();
    println!("{}", render_per_class(&report));

    let path = std::env::temp_dir().join("fuselab-example-model.bin");
    save_model(&model, &path).unwrap();
    let reloaded = load_model(&path).unwrap();
    let p = &test.publications[0];
    let (a, b) = (predict(&model, p).unwrap(), predict(&reloaded, p).unwrap());
    println!("saved to {} ({} bytes)", path.display(), std::fs::metadata(&path).unwrap().len());
    println!("prediction before {:?}, after reload {:?}", a.distribution, b.distribution);
    assert_eq!(a, b);
}
