use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::labels::LabelSpace;
use super::publication::{Dataset, Publication, Visual};
use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// Keywords carrying the text bit.
pub const TEXT_KEYWORDS: [&str; 2] = ["sunny", "rainy"];

const FILLER: [&str; 40] = [
    "the", "a", "today", "we", "went", "to", "park", "with", "my", "friends", "and", "it", "was", "very", "long",
    "day", "after", "work", "in", "city", "look", "at", "this", "picture", "from", "our", "trip", "last", "week",
    "so", "much", "fun", "again", "here", "there", "morning", "evening", "walk", "home", "new",
];

/// Smallest grid side the generator accepts.
pub const MIN_GRID: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticTask {
    /// Label is the xor of a visual bit and a text bit.
    XorCrossmodal,
    /// Both modalities carry the label bit.
    UnimodalSeparable,
}

impl std::str::FromStr for SyntheticTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xor-crossmodal" | "xor" => Ok(Self::XorCrossmodal),
            "unimodal-separable" | "unimodal" => Ok(Self::UnimodalSeparable),
            _ => Err(Error::Config(format!(
                "unknown synthetic task {s:?}; expected xor-crossmodal or unimodal-separable"
            ))),
        }
    }
}

impl SyntheticTask {
    pub fn label(self, visual_bit: bool, text_bit: bool) -> bool {
        match self {
            SyntheticTask::XorCrossmodal => visual_bit ^ text_bit,
            SyntheticTask::UnimodalSeparable => visual_bit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub task: SyntheticTask,
    pub n: usize,
    pub seed: u64,
    /// Standard deviation of the background noise added to every grid cell.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Number of filler words drawn from.
    #[serde(default = "default_vocab")]
    pub vocab_size: usize,
}

fn default_noise() -> f64 {
    0.1
}
fn default_grid() -> usize {
    8
}
fn default_vocab() -> usize {
    20
}

impl SyntheticSpec {
    pub fn new(task: SyntheticTask, n: usize, seed: u64) -> Self {
        Self {
            task,
            n,
            seed,
            noise: default_noise(),
            grid_size: default_grid(),
            vocab_size: default_vocab(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("synthetic n must be at least 1".into()));
        }
        if self.vocab_size == 0 || self.vocab_size > FILLER.len() {
            return Err(Error::Config(format!(
                "synthetic vocab_size must be in 1..={}, got {}",
                FILLER.len(),
                self.vocab_size
            )));
        }
        if self.grid_size < MIN_GRID {
            return Err(Error::Config(format!(
                "synthetic grid_size must be at least {MIN_GRID}, got {}",
                self.grid_size
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("synthetic noise must be finite and non-negative, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Generated dataset together with the hidden per-modality bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub visual_bits: Vec<bool>,
    pub text_bits: Vec<bool>,
}

/// Label space of both synthetic tasks.
pub fn synthetic_labels() -> LabelSpace {
    LabelSpace::custom(["zero", "one"]).expect("two distinct names")
}

fn render_grid(rng: &mut ChaCha8Rng, side: usize, right: bool, noise: f64) -> Tensor {
    let mut data = vec![0.0; side * side];
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("validated noise");
        for v in &mut data {
            *v = normal.sample(rng);
        }
    }
    let half = side / 2;
    let row = rng.random_range(0..=side - 2);
    let col = if right {
        rng.random_range(half..=side - 2)
    } else {
        rng.random_range(0..=half - 2)
    };
    for r in row..row + 2 {
        for c in col..col + 2 {
            data[r * side + c] += 1.0;
        }
    }
    // stored as f32 on disk, so keep values exactly representable
    let data = data.into_iter().map(|v| v as f32 as f64).collect();
    Tensor::new(vec![side, side, 1], data).expect("shape matches")
}

fn render_text(rng: &mut ChaCha8Rng, vocab: &[&str], bit: bool) -> String {
    let len = rng.random_range(4..=7);
    let mut words: Vec<&str> = (0..len).map(|_| vocab[rng.random_range(0..vocab.len())]).collect();
    let at = rng.random_range(0..=words.len());
    words.insert(at, TEXT_KEYWORDS[usize::from(bit)]);
    words.join(" ")
}

/// Generates a synthetic two-modality dataset; identical specs give identical data.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = &FILLER[..spec.vocab_size];
    let mut publications = Vec::with_capacity(spec.n);
    let mut visual_bits = Vec::with_capacity(spec.n);
    let mut text_bits = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let a: bool = rng.random();
        let b: bool = match spec.task {
            SyntheticTask::XorCrossmodal => rng.random(),
            SyntheticTask::UnimodalSeparable => a,
        };
        let grid = render_grid(&mut rng, spec.grid_size, a, spec.noise);
        let text = render_text(&mut rng, vocab, b);
        publications.push(Publication {
            id: format!("syn-{}-{i}", spec.seed),
            visual: Some(Visual::Grid(grid)),
            text,
            caption: None,
            entity_features: None,
            label: usize::from(spec.task.label(a, b)),
        });
        visual_bits.push(a);
        text_bits.push(b);
    }
    Ok(SyntheticData {
        dataset: Dataset::new(publications, synthetic_labels())?,
        visual_bits,
        text_bits,
    })
}

/// Best achievable accuracy from one modality's bit alone, by enumerating the
/// joint distribution of `(a, b, label)` with `a`, `b` uniform. Returns
/// `(visual_only, text_only)`.
pub fn bayes_single_modality_accuracy(task: SyntheticTask) -> (f64, f64) {
    let cells: Vec<(bool, bool, f64)> = match task {
        SyntheticTask::XorCrossmodal => [(false, false), (false, true), (true, false), (true, true)]
            .into_iter()
            .map(|(a, b)| (a, b, 0.25))
            .collect(),
        SyntheticTask::UnimodalSeparable => vec![(false, false, 0.5), (true, true, 0.5)],
    };
    let acc = |key: &dyn Fn(bool, bool) -> bool| {
        [false, true]
            .iter()
            .map(|&observed| {
                let mass = |y: bool| {
                    cells
                        .iter()
                        .filter(|(a, b, _)| key(*a, *b) == observed && task.label(*a, *b) == y)
                        .map(|c| c.2)
                        .sum::<f64>()
                };
                mass(false).max(mass(true))
            })
            .sum::<f64>()
    };
    (acc(&|a, _| a), acc(&|_, b| b))
}

/// Empirical mutual information in bits between two discrete sequences.
pub fn mutual_information_bits(x: &[usize], y: &[usize]) -> f64 {
    assert_eq!(x.len(), y.len(), "sequences must pair up");
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut px: HashMap<usize, f64> = HashMap::new();
    let mut py: HashMap<usize, f64> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1.0;
        *px.entry(a).or_default() += 1.0;
        *py.entry(b).or_default() += 1.0;
    }
    let mut keys: Vec<_> = joint.into_iter().collect();
    keys.sort_by_key(|(k, _)| *k);
    keys.iter()
        .map(|&((a, b), c)| {
            let pxy = c / n;
            pxy * (pxy / ((px[&a] / n) * (py[&b] / n))).log2()
        })
        .sum()
}

/// Index lists for the train, validation and test portions, each cut into batches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitBatches {
    pub train: Vec<Vec<usize>>,
    pub val: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

impl SplitBatches {
    pub fn train_indices(&self) -> Vec<usize> {
        self.train.concat()
    }

    pub fn val_indices(&self) -> Vec<usize> {
        self.val.concat()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.test.concat()
    }
}

/// Shuffles `0..n` with `seed`, cuts it by `ratios` (train, val, test) and
/// batches each part. The last batch of each part may be short.
pub fn split_and_batch(n: usize, ratios: [f64; 3], batch_size: usize, seed: u64) -> Result<SplitBatches> {
    if batch_size < 1 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be in [0, 1] and sum to 1")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * ratios[0]).round() as usize;
    let n_val = (((n as f64) * ratios[1]).round() as usize).min(n - n_train);
    let batches = |part: &[usize]| part.chunks(batch_size).map(<[usize]>::to_vec).collect();
    Ok(SplitBatches {
        train: batches(&idx[..n_train]),
        val: batches(&idx[n_train..n_train + n_val]),
        test: batches(&idx[n_train + n_val..]),
    })
}
