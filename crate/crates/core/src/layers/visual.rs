use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer};
use crate::error::{Error, Result};
use crate::numcore::{Graph, ParamId, ParamStore, Tensor, Var};

const KERNEL: usize = 3;
/// Fixed pooled grid; keeps coarse position while making the latent size
/// independent of the input grid size.
const POOL_CELLS: (usize, usize) = (2, 2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VisualEncoderConfig {
    /// Two 3×3 convolutions + max-pool + projection over `[H, W, channels]` grids.
    Conv {
        channels: usize,
        conv_channels: [usize; 2],
        latent_dim: usize,
    },
    /// Projection of a precomputed feature vector.
    Features { feature_dim: usize, latent_dim: usize },
}

impl VisualEncoderConfig {
    pub fn latent_dim(&self) -> usize {
        match self {
            VisualEncoderConfig::Conv { latent_dim, .. } | VisualEncoderConfig::Features { latent_dim, .. } => *latent_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvVisualEncoder {
    pub kernels: [ParamId; 2],
    pub biases: [ParamId; 2],
    pub projection: DenseLayer,
    channels: usize,
}

impl ConvVisualEncoder {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        conv_channels: [usize; 2],
        latent_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let [c1, c2] = conv_channels;
        let mut conv = |idx: usize, cin: usize, cout: usize| {
            let fan_in = KERNEL * KERNEL * cin;
            let k = store.add(
                format!("{name}.conv{idx}.kernel"),
                super::glorot(rng, &[KERNEL, KERNEL, cin, cout], fan_in, KERNEL * KERNEL * cout),
            );
            let b = store.add(format!("{name}.conv{idx}.bias"), Tensor::zeros(&[cout]));
            (k, b)
        };
        let (k1, b1) = conv(1, channels, c1);
        let (k2, b2) = conv(2, c1, c2);
        let projection = DenseLayer::new(
            store,
            &format!("{name}.projection"),
            POOL_CELLS.0 * POOL_CELLS.1 * c2,
            latent_dim,
            Activation::Tanh,
            rng,
        );
        Self {
            kernels: [k1, k2],
            biases: [b1, b2],
            projection,
            channels,
        }
    }

    /// Smallest admissible grid side: two valid 3×3 convolutions must leave
    /// at least one cell per pooling bin.
    pub fn min_side() -> usize {
        2 * (KERNEL - 1) + POOL_CELLS.0.max(POOL_CELLS.1)
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = vec![self.kernels[0], self.biases[0], self.kernels[1], self.biases[1]];
        ids.extend(self.projection.params());
        ids
    }

    pub fn encode(&self, g: &mut Graph, store: &ParamStore, grid: Var) -> Result<Var> {
        let shape = g.value(grid).shape().to_vec();
        let min = Self::min_side();
        match shape[..] {
            [h, w, c] if h >= min && w >= min && c == self.channels => {}
            _ => return Err(Error::dim("encode_visual", &shape, &[min, min, self.channels])),
        }
        let mut x = grid;
        for (k, b) in self.kernels.iter().zip(&self.biases) {
            let (k, b) = (g.param(store, *k), g.param(store, *b));
            x = g.conv2d(x, k, b)?;
            x = g.relu(x)?;
        }
        let pooled = g.adaptive_max_pool(x, POOL_CELLS.0, POOL_CELLS.1)?;
        let n = g.value(pooled).numel();
        let flat = g.reshape(pooled, &[n])?;
        self.projection.forward(g, store, flat)
    }
}

/// Encoder for publications that carry a precomputed visual feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVisualEncoder {
    pub projection: DenseLayer,
}

impl FeatureVisualEncoder {
    pub fn new(store: &mut ParamStore, name: &str, feature_dim: usize, latent_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            projection: DenseLayer::new(
                store,
                &format!("{name}.projection"),
                feature_dim,
                latent_dim,
                Activation::Tanh,
                rng,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VisualEncoder {
    Conv(ConvVisualEncoder),
    Features(FeatureVisualEncoder),
}

impl VisualEncoder {
    pub fn new(store: &mut ParamStore, name: &str, config: VisualEncoderConfig, rng: &mut impl Rng) -> Self {
        match config {
            VisualEncoderConfig::Conv {
                channels,
                conv_channels,
                latent_dim,
            } => VisualEncoder::Conv(ConvVisualEncoder::new(store, name, channels, conv_channels, latent_dim, rng)),
            VisualEncoderConfig::Features {
                feature_dim,
                latent_dim,
            } => VisualEncoder::Features(FeatureVisualEncoder::new(store, name, feature_dim, latent_dim, rng)),
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            VisualEncoder::Conv(c) => c.projection.out_dim(),
            VisualEncoder::Features(f) => f.projection.out_dim(),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match self {
            VisualEncoder::Conv(c) => c.params(),
            VisualEncoder::Features(f) => f.projection.params(),
        }
    }

    /// `input` is an `[H, W, C]` grid for the convolutional encoder or a
    /// feature vector for the feature encoder.
    pub fn encode(&self, g: &mut Graph, store: &ParamStore, input: Var) -> Result<Var> {
        match self {
            VisualEncoder::Conv(c) => c.encode(g, store, input),
            VisualEncoder::Features(f) => f.projection.forward(g, store, input),
        }
    }
}

/// Encodes one `[H, W, C]` grid into `z_v`.
pub fn encode_visual(grid: &Tensor, encoder: &ConvVisualEncoder, store: &ParamStore) -> Result<Vec<f64>> {
    if !grid.is_finite() {
        return Err(Error::Input("visual grid contains non-finite values".into()));
    }
    let mut g = Graph::new();
    let x = g.constant(grid.clone())?;
    let z = encoder.encode(&mut g, store, x)?;
    Ok(g.value(z).data().to_vec())
}
