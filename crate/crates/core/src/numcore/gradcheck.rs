//! Central finite-difference verification of analytic gradients.

use super::graph::{Graph, Var};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// `max_i |analytic_i − numeric_i| / max(1, |analytic_i|, |numeric_i|)`
    pub max_rel_err: f64,
    pub worst_coordinate: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub passed: bool,
}

fn finish(analytic: Vec<f64>, numeric: Vec<f64>, tol: f64) -> CheckReport {
    let mut max_rel_err = 0.0;
    let mut worst_coordinate = 0;
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = (a - n).abs() / 1f64.max(a.abs()).max(n.abs());
        if err > max_rel_err {
            max_rel_err = err;
            worst_coordinate = i;
        }
    }
    CheckReport {
        max_rel_err,
        worst_coordinate,
        passed: max_rel_err < tol,
        analytic,
        numeric,
    }
}

fn as_evaluation_error(err: Error, coordinate: usize) -> Error {
    match err {
        Error::NonFinite { .. } => Error::Evaluation { coordinate },
        other => other,
    }
}

fn scalar_output(g: &Graph, y: Var) -> Result<f64> {
    let t = g.value(y);
    if !t.is_scalar() {
        return Err(Error::Contract(format!(
            "gradient check needs a scalar function, got shape {:?}",
            t.shape()
        )));
    }
    Ok(t.item())
}

/// Checks the gradient of a scalar function of one tensor at `point`.
pub fn grad_check<F>(f: F, point: &Tensor, h: f64, tol: f64) -> Result<CheckReport>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let x = g.leaf(point.clone().with_requires_grad())?;
    let y = f(&mut g, x)?;
    scalar_output(&g, y)?;
    g.backward(y)?;
    let analytic = g
        .grad(x)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; point.numel()]);

    let eval = |values: Vec<f64>, coordinate: usize| -> Result<f64> {
        let mut g = Graph::new();
        let x = g
            .constant(Tensor::from_parts(point.shape().to_vec(), values))
            .map_err(|e| as_evaluation_error(e, coordinate))?;
        let y = f(&mut g, x).map_err(|e| as_evaluation_error(e, coordinate))?;
        scalar_output(&g, y)
    };
    let mut numeric = Vec::with_capacity(point.numel());
    for i in 0..point.numel() {
        let mut plus = point.data().to_vec();
        let mut minus = plus.clone();
        plus[i] += h;
        minus[i] -= h;
        numeric.push((eval(plus, i)? - eval(minus, i)?) / (2.0 * h));
    }
    Ok(finish(analytic, numeric, tol))
}

/// Checks the gradient of a scalar function with respect to every value in
/// `store`, in [`ParamStore::flatten`] order. The store is restored afterwards.
pub fn grad_check_params<F>(store: &mut ParamStore, f: F, h: f64, tol: f64) -> Result<CheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    store.set_all_trainable();
    let mut g = Graph::new();
    let y = f(&mut g, store)?;
    scalar_output(&g, y)?;
    g.backward(y)?;
    g.export_param_grads(store);
    let analytic: Vec<f64> = store
        .ids()
        .flat_map(|id| {
            let t = store.get(id);
            t.grad()
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.numel()])
        })
        .collect();
    store.zero_grads();

    let original = store.flatten();
    let mut numeric = Vec::with_capacity(original.len());
    let mut values = original.clone();
    let mut result = Ok(());
    for i in 0..original.len() {
        let side = |delta: f64, values: &mut Vec<f64>, store: &mut ParamStore| -> Result<f64> {
            values[i] = original[i] + delta;
            store.assign_flat(values)?;
            let mut g = Graph::new();
            let y = f(&mut g, store).map_err(|e| as_evaluation_error(e, i))?;
            scalar_output(&g, y)
        };
        let step = side(h, &mut values, store)
            .and_then(|p| side(-h, &mut values, store).map(|m| (p - m) / (2.0 * h)));
        values[i] = original[i];
        match step {
            Ok(d) => numeric.push(d),
            Err(e) => {
                result = Err(e);
                break;
            }
        }
    }
    store.assign_flat(&original)?;
    result?;
    Ok(finish(analytic, numeric, tol))
}
