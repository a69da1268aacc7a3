use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{Activation, DenseLayer};
use crate::numcore::{Graph, ParamId, ParamStore, Tensor, Var};

/// Autoencoder fusion: `z = [z_v; z_t]` is compressed to `z_fuse` and
/// reconstructed as `ẑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoFusion {
    pub encoder: DenseLayer,
    pub decoder: DenseLayer,
}

#[derive(Debug, Clone, Copy)]
pub struct AutoFusionOutput {
    pub joint: Var,
    pub fused: Var,
    pub reconstruction: Var,
}

impl AutoFusion {
    pub fn new(store: &mut ParamStore, name: &str, latent_dim: usize, fuse_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if fuse_dim == 0 || fuse_dim >= 2 * latent_dim {
            return Err(Error::Config(format!(
                "auto-fusion bottleneck {fuse_dim} must be in 1..{}",
                2 * latent_dim
            )));
        }
        let encoder = DenseLayer::new(
            store,
            &format!("{name}.encoder"),
            2 * latent_dim,
            fuse_dim,
            Activation::Tanh,
            rng,
        );
        let decoder = DenseLayer::new(
            store,
            &format!("{name}.decoder"),
            fuse_dim,
            2 * latent_dim,
            Activation::Identity,
            rng,
        );
        Ok(Self { encoder, decoder })
    }

    pub fn output_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.encoder.params();
        ids.extend(self.decoder.params());
        ids
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, z_v: Var, z_t: Var) -> Result<AutoFusionOutput> {
        let joint = g.concat(&[z_v, z_t], 0)?;
        let fused = self.encoder.forward(g, store, joint)?;
        let reconstruction = self.decoder.forward(g, store, fused)?;
        Ok(AutoFusionOutput {
            joint,
            fused,
            reconstruction,
        })
    }
}

/// `‖ẑ − z‖²` on the tape.
pub fn reconstruction_loss(g: &mut Graph, joint: Var, reconstruction: Var) -> Result<Var> {
    let (a, b) = (g.value(joint).shape(), g.value(reconstruction).shape());
    if a != b {
        return Err(Error::dim("auto_fusion_loss", a, b));
    }
    let diff = g.sub(reconstruction, joint)?;
    g.squared_norm(diff)
}

/// Reconstruction loss `J_auto = ‖ẑ − z‖²` of plain vectors.
pub fn auto_fusion_loss(z: &[f64], z_hat: &[f64]) -> Result<f64> {
    if z.len() != z_hat.len() || z.is_empty() {
        return Err(Error::dim("auto_fusion_loss", &[z.len()], &[z_hat.len()]));
    }
    let mut g = Graph::new();
    let a = g.constant(Tensor::vector(z))?;
    let b = g.constant(Tensor::vector(z_hat))?;
    let l = reconstruction_loss(&mut g, a, b)?;
    Ok(g.scalar(l))
}
