use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::numcore::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Sgd,
    Adam {
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "epsilon")]
        epsilon: f64,
    },
}

fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn epsilon() -> f64 {
    1e-8
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::adam()
    }
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: beta1(),
            beta2: beta2(),
            epsilon: epsilon(),
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Sgd => 1e-2,
            OptimizerKind::Adam { .. } => 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Applies accumulated gradients from a [`ParamStore`] and clears them.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    steps: u64,
    moments: HashMap<ParamId, Moments>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            steps: 0,
            moments: HashMap::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// Updates `ids` in place from their gradients; parameters without a gradient are skipped.
    pub fn step(&mut self, store: &mut ParamStore, ids: &[ParamId]) {
        self.steps += 1;
        let t = self.steps as i32;
        for &id in ids {
            let Some(grad) = store.get(id).grad().map(<[f64]>::to_vec) else {
                continue;
            };
            let lr = self.learning_rate;
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, g) in store.get_mut(id).data_mut().iter_mut().zip(&grad) {
                        *w -= lr * g;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, epsilon } => {
                    let mo = self.moments.entry(id).or_insert_with(|| Moments {
                        m: vec![0.0; grad.len()],
                        v: vec![0.0; grad.len()],
                    });
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    let data = store.get_mut(id).data_mut();
                    for i in 0..grad.len() {
                        mo.m[i] = beta1 * mo.m[i] + (1.0 - beta1) * grad[i];
                        mo.v[i] = beta2 * mo.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                        let m_hat = mo.m[i] / c1;
                        let v_hat = mo.v[i] / c2;
                        data[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        for &id in ids {
            store.get_mut(id).zero_grad();
        }
    }
}
