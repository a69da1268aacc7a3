//! Bidirectional LSTM text encoder with dot-product word attention.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, EmbeddingTable};
use crate::error::{Error, Result};
use crate::numcore::{Graph, ParamId, ParamStore, Tensor, Var};

/// Range of the uniform initialisation used for gate and attention parameters.
const GATE_INIT: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextEncoderConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Hidden width of each direction.
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

/// One LSTM direction. Gate rows are laid out as input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub weight: ParamId,
    pub bias: ParamId,
    hidden: usize,
}

impl LstmCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            super::uniform(rng, &[4 * hidden, input + hidden], GATE_INIT),
        );
        let mut bias = super::uniform(rng, &[4 * hidden], GATE_INIT);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        let bias = store.add(format!("{name}.bias"), bias);
        Self { weight, bias, hidden }
    }

    /// One recurrence step; returns `(h, c)`.
    pub fn step(&self, g: &mut Graph, store: &ParamStore, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let n = self.hidden;
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let xh = g.concat(&[x, h], 0)?;
        let gates = g.affine(w, xh, b)?;
        let sig = g.slice(gates, 0, 0, 3 * n)?;
        let sig = g.sigmoid(sig)?;
        let input = g.slice(sig, 0, 0, n)?;
        let forget = g.slice(sig, 0, n, n)?;
        let output = g.slice(sig, 0, 2 * n, n)?;
        let cand = g.slice(gates, 0, 3 * n, n)?;
        let cand = g.tanh(cand)?;
        let kept = g.mul(forget, c)?;
        let written = g.mul(input, cand)?;
        let c_next = g.add(kept, written)?;
        let squashed = g.tanh(c_next)?;
        let h_next = g.mul(output, squashed)?;
        Ok((h_next, c_next))
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.weight, self.bias]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TextEncoding {
    /// `z_t`, length `latent_dim`.
    pub latent: Var,
    /// Attention weights over timesteps.
    pub attention: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentTextEncoder {
    pub embedding: EmbeddingTable,
    pub forward_cell: LstmCell,
    pub backward_cell: LstmCell,
    /// Attention query over concatenated `[h_fwd; h_bwd]` states.
    pub query: ParamId,
    pub projection: DenseLayer,
    config: TextEncoderConfig,
}

impl RecurrentTextEncoder {
    /// Token id 0 is the out-of-vocabulary slot.
    pub fn new(store: &mut ParamStore, name: &str, config: TextEncoderConfig, rng: &mut impl Rng) -> Self {
        let TextEncoderConfig {
            vocab_size,
            embed_dim,
            hidden_dim,
            latent_dim,
        } = config;
        let embedding = EmbeddingTable::new(store, &format!("{name}.embedding"), vocab_size, embed_dim, 0, rng);
        let forward_cell = LstmCell::new(store, &format!("{name}.lstm_fwd"), embed_dim, hidden_dim, rng);
        let backward_cell = LstmCell::new(store, &format!("{name}.lstm_bwd"), embed_dim, hidden_dim, rng);
        let query = store.add(
            format!("{name}.attention_query"),
            super::uniform(rng, &[2 * hidden_dim], GATE_INIT),
        );
        let projection = DenseLayer::new(
            store,
            &format!("{name}.projection"),
            2 * hidden_dim,
            latent_dim,
            Activation::Tanh,
            rng,
        );
        Self {
            embedding,
            forward_cell,
            backward_cell,
            query,
            projection,
            config,
        }
    }

    pub fn config(&self) -> TextEncoderConfig {
        self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = vec![self.embedding.table];
        ids.extend(self.forward_cell.params());
        ids.extend(self.backward_cell.params());
        ids.push(self.query);
        ids.extend(self.projection.params());
        ids
    }

    pub fn encode(&self, g: &mut Graph, store: &ParamStore, tokens: &[usize]) -> Result<TextEncoding> {
        if tokens.is_empty() {
            return Err(Error::Input(
                "empty token sequence; substitute the [empty] token".into(),
            ));
        }
        let hidden = self.config.hidden_dim;
        let embedded = self.embedding.lookup(g, store, tokens)?;
        let inputs: Vec<Var> = (0..tokens.len())
            .map(|t| g.row(embedded, t))
            .collect::<Result<_>>()?;

        let zeros = g.constant(Tensor::zeros(&[hidden]))?;
        let run = |g: &mut Graph, cell: &LstmCell, order: &mut dyn Iterator<Item = usize>| -> Result<Vec<(usize, Var)>> {
            let (mut h, mut c) = (zeros, zeros);
            let mut out = Vec::with_capacity(tokens.len());
            for t in order {
                (h, c) = cell.step(g, store, inputs[t], h, c)?;
                out.push((t, h));
            }
            Ok(out)
        };
        let fwd = run(g, &self.forward_cell, &mut (0..tokens.len()))?;
        let mut bwd = run(g, &self.backward_cell, &mut (0..tokens.len()).rev())?;
        bwd.reverse();

        let states: Vec<Var> = fwd
            .iter()
            .zip(&bwd)
            .map(|((_, hf), (_, hb))| g.concat(&[*hf, *hb], 0))
            .collect::<Result<_>>()?;
        let states = g.stack_rows(&states)?;
        let query = g.param(store, self.query);
        let scores = g.matmul(states, query)?;
        let attention = g.softmax(scores)?;
        let context = g.matmul(attention, states)?;
        let latent = self.projection.forward(g, store, context)?;
        Ok(TextEncoding { latent, attention })
    }
}

/// Encodes a token sequence, returning `(z_t, attention weights)` as plain vectors.
pub fn encode_text(tokens: &[usize], encoder: &RecurrentTextEncoder, store: &ParamStore) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut g = Graph::new();
    let enc = encoder.encode(&mut g, store, tokens)?;
    Ok((
        g.value(enc.latent).data().to_vec(),
        g.value(enc.attention).data().to_vec(),
    ))
}
