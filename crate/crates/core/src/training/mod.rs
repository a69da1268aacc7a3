//! Model assembly, objectives, optimizers, the alternating training loop and
//! model files.

mod model;
mod optim;
mod persist;
mod predict;
mod suite;
mod toy;
mod trainer;
mod vocab;

pub use model::{
    cross_entropy, cross_entropy_var, AdversarialObjective, Forward, FusionModel, InputModes, ModelConfig,
    Objective, ObjectiveSettings, PreparedSample, TextSection, VisualSection,
};
pub use optim::{Optimizer, OptimizerKind};
pub use persist::{config_hash, load_model, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC};
pub use predict::{evaluate, predict, predict_batch, Prediction};
pub use suite::{gradient_suite, GradCheckResult, GRADCHECK_STEP};
pub use toy::{train_gan_toy, GanToyConfig, GanToyReport};
pub use trainer::{loss_csv, LossReport, TrainConfig, Trainer};
pub use vocab::{token_strings, Vocabulary, EMPTY_ID, EMPTY_TOKEN, OOV_ID, OOV_TOKEN};

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datakit::Dataset;
use crate::error::Result;
use crate::textprep::{normalize, Lexicons};

/// Builds the vocabulary from `train` and initialises a model with `seed`.
pub fn build_model(config: ModelConfig, train: &Dataset, lexicons: Arc<Lexicons>, seed: u64) -> Result<FusionModel> {
    let texts: Vec<_> = train
        .publications
        .iter()
        .map(|p| normalize(&p.full_text(), &lexicons))
        .collect();
    let vocab = Vocabulary::build(&texts, config.min_token_count);
    FusionModel::new(config, train.labels.clone(), vocab, lexicons, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Prepares every publication of `dataset` for `model`.
pub fn prepare_all(model: &FusionModel, dataset: &Dataset) -> Result<Vec<PreparedSample>> {
    dataset.publications.iter().map(|p| model.prepare(p)).collect()
}

#[cfg(test)]
mod tests;
