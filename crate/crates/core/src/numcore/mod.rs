//! Dense `f64` tensors, a reverse-mode autodiff tape and a finite-difference
//! gradient checker.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, grad_check_params, CheckReport};
pub use graph::{Graph, Var, LOG_EPSILON};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
