use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Sigmoid,
    Tanh,
    Relu,
    Softmax,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Result<Var> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Tanh => g.tanh(x),
            Activation::Relu => g.relu(x),
            Activation::Softmax => g.softmax(x),
        }
    }
}

/// Fully connected layer `y = act(W x + b)` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    in_dim: usize,
    out_dim: usize,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(in_dim > 0 && out_dim > 0, "dense layer {name} needs positive dims");
        let weight = store.add(
            format!("{name}.weight"),
            super::glorot(rng, &[out_dim, in_dim], in_dim, out_dim),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_dim]));
        Self {
            weight,
            bias,
            activation,
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.weight, self.bias]
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let shape = g.value(x).shape();
        if shape != [self.in_dim] {
            return Err(Error::dim("dense_forward", shape, &[self.in_dim]));
        }
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let y = g.affine(w, x, b)?;
        self.activation.apply(g, y)
    }
}

/// Evaluates a dense layer on a plain vector.
pub fn dense_forward(x: &[f64], layer: &DenseLayer, store: &ParamStore) -> Result<Vec<f64>> {
    if x.len() != layer.in_dim {
        return Err(Error::dim("dense_forward", &[x.len()], &[layer.in_dim]));
    }
    let mut g = Graph::new();
    let xv = g.constant(Tensor::vector(x))?;
    let y = layer.forward(&mut g, store, xv)?;
    Ok(g.value(y).data().to_vec())
}
