use rand::Rng;

use crate::error::Result;
use crate::layers::{Activation, DenseLayer};
use crate::numcore::{Graph, ParamId, ParamStore, Var};

/// `[z_v; z_t]`, optionally followed by a projection to `d_fuse`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatFusion {
    pub projection: Option<DenseLayer>,
    latent_dim: usize,
}

impl ConcatFusion {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        latent_dim: usize,
        projection: Option<(usize, Activation)>,
        rng: &mut impl Rng,
    ) -> Self {
        let projection = projection.map(|(out, act)| {
            DenseLayer::new(store, &format!("{name}.projection"), 2 * latent_dim, out, act, rng)
        });
        Self {
            projection,
            latent_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.projection
            .as_ref()
            .map_or(2 * self.latent_dim, DenseLayer::out_dim)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.projection.as_ref().map(DenseLayer::params).unwrap_or_default()
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, z_v: Var, z_t: Var) -> Result<Var> {
        let joint = g.concat(&[z_v, z_t], 0)?;
        match &self.projection {
            Some(p) => p.forward(g, store, joint),
            None => Ok(joint),
        }
    }
}
