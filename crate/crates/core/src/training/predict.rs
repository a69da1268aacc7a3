use super::model::{FusionModel, PreparedSample};
use crate::datakit::{Dataset, Publication};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_labels, MetricsReport};
use crate::numcore::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub distribution: Vec<f64>,
    pub label: usize,
}

impl Prediction {
    fn from_distribution(distribution: Vec<f64>) -> Self {
        let label = Tensor::vector(&distribution).argmax();
        Self { distribution, label }
    }
}

/// Class distribution and argmax label (lowest index wins ties).
pub fn predict(model: &FusionModel, publication: &Publication) -> Result<Prediction> {
    let s = model.prepare(publication)?;
    Ok(Prediction::from_distribution(model.predict_prepared(&s)?))
}

/// Predicts prepared samples on up to `threads` worker threads; order is preserved.
pub fn predict_batch(model: &FusionModel, samples: &[PreparedSample], threads: usize) -> Result<Vec<Prediction>> {
    let threads = threads.clamp(1, samples.len().max(1));
    if threads == 1 {
        return samples
            .iter()
            .map(|s| model.predict_prepared(s).map(Prediction::from_distribution))
            .collect();
    }
    let chunk = samples.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| model.predict_prepared(s).map(Prediction::from_distribution))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(samples.len());
        for h in handles {
            out.extend(h.join().expect("prediction worker panicked")?);
        }
        Ok(out)
    })
}

/// Predicted labels and metrics of `model` on `dataset`.
pub fn evaluate(model: &FusionModel, dataset: &Dataset, threads: usize) -> Result<(Vec<usize>, MetricsReport)> {
    if dataset.is_empty() {
        return Err(Error::Input("cannot evaluate on an empty dataset".into()));
    }
    if dataset.labels.names != model.labels.names {
        return Err(Error::Config(format!(
            "dataset labels {:?} do not match model labels {:?}",
            dataset.labels.names, model.labels.names
        )));
    }
    let samples = dataset
        .publications
        .iter()
        .map(|p| model.prepare(p))
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<usize> = predict_batch(model, &samples, threads)?.into_iter().map(|p| p.label).collect();
    let truths: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let report = evaluate_labels(&truths, &preds, &model.labels)?;
    Ok((preds, report))
}
