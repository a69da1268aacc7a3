use rand::Rng;

use crate::error::Result;
use crate::numcore::{Graph, ParamId, ParamStore, Var};

/// Token-id → vector lookup table. Ids outside the vocabulary map to `oov`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub table: ParamId,
    vocab_size: usize,
    dim: usize,
    oov: usize,
}

impl EmbeddingTable {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        vocab_size: usize,
        dim: usize,
        oov: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(oov < vocab_size, "oov index outside vocabulary");
        let table = store.add(
            format!("{name}.table"),
            super::uniform(rng, &[vocab_size, dim], 0.5),
        );
        Self {
            table,
            vocab_size,
            dim,
            oov,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn oov(&self) -> usize {
        self.oov
    }

    pub fn resolve(&self, id: usize) -> usize {
        if id < self.vocab_size {
            id
        } else {
            self.oov
        }
    }

    /// `[ids.len(), dim]` matrix of embeddings.
    pub fn lookup(&self, g: &mut Graph, store: &ParamStore, ids: &[usize]) -> Result<Var> {
        let ids: Vec<usize> = ids.iter().map(|&i| self.resolve(i)).collect();
        let table = g.param(store, self.table);
        g.gather_rows(table, &ids)
    }
}
