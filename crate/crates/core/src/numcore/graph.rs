//! Tape-recorded computation graph with reverse-mode differentiation.
//!
//! Every operation appends a node whose inputs are already on the tape, so the
//! node order is a topological order and the backward pass simply walks the
//! tape in reverse.

use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Lower bound applied by [`Graph::log_clamped`] before taking the logarithm.
pub const LOG_EPSILON: f64 = 1e-12;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Concat(Vec<Var>, usize),
    Slice { input: Var, axis: usize, start: usize },
    Reshape(Var),
    Row(Var, usize),
    GatherRows(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    Exp(Var),
    Log(Var),
    LogClamped(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softmax(Var),
    SquaredNorm(Var),
    Clamp(Var, f64, f64),
    Conv2d { input: Var, kernel: Var, bias: Var },
    AdaptiveMaxPool { input: Var, argmax: Vec<usize> },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Which operand, if any, is a broadcast scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    None,
    Lhs,
    Rhs,
}

#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    bound: HashMap<ParamId, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tape position: number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, name: &'static str, op: Op, value: Tensor, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    // ---- leaves ----------------------------------------------------------

    /// Records a leaf; it participates in differentiation if `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor) -> Result<Var> {
        let rg = tensor.requires_grad();
        let value = Tensor::from_parts(tensor.shape().to_vec(), tensor.into_data());
        self.push("leaf", Op::Leaf, value, rg)
    }

    pub fn constant(&mut self, tensor: Tensor) -> Result<Var> {
        let value = Tensor::from_parts(tensor.shape().to_vec(), tensor.into_data());
        self.push("constant", Op::Leaf, value, false)
    }

    /// Binds a stored parameter. Each parameter is recorded once per graph;
    /// frozen parameters (`requires_grad == false`) enter as constants.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.bound.get(&id) {
            return *v;
        }
        let t = store.get(id);
        let value = Tensor::from_parts(t.shape().to_vec(), t.data().to_vec());
        let rg = t.requires_grad();
        let v = self
            .push("param", Op::Leaf, value, rg)
            .expect("stored parameters are finite");
        self.bound.insert(id, v);
        v
    }

    /// Copy of `v` that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.push("detach", Op::Leaf, value, false)
            .expect("source value already finite")
    }

    // ---- elementwise binary ----------------------------------------------

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<(Vec<usize>, Broadcast)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let (na, nb) = (self.data(a).len(), self.data(b).len());
        if sa == sb {
            Ok((sa.to_vec(), Broadcast::None))
        } else if na == 1 {
            Ok((sb.to_vec(), Broadcast::Lhs))
        } else if nb == 1 {
            Ok((sa.to_vec(), Broadcast::Rhs))
        } else {
            Err(Error::dim(op, sa, sb))
        }
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (shape, bc) = self.broadcast(name, a, b)?;
        let (da, db) = (self.data(a), self.data(b));
        let data: Vec<f64> = match bc {
            Broadcast::None => da.iter().zip(db).map(|(x, y)| f(*x, *y)).collect(),
            Broadcast::Lhs => db.iter().map(|y| f(da[0], *y)).collect(),
            Broadcast::Rhs => da.iter().map(|x| f(*x, db[0])).collect(),
        };
        let rg = self.any_grad(&[a, b]);
        self.push(name, op, Tensor::from_parts(shape, data), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.data(b).iter().any(|v| *v == 0.0) {
            return Err(Error::Domain {
                op: "div",
                detail: "division by zero".into(),
            });
        }
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    // ---- elementwise unary -----------------------------------------------

    fn unary(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        let data = t.data().iter().map(|x| f(*x)).collect();
        let value = Tensor::from_parts(t.shape().to_vec(), data);
        let rg = self.nodes[a.0].requires_grad;
        self.push(name, op, value, rg)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary("neg", a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary("scale", a, |x| c * x, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary("add_scalar", a, |x| x + c, Op::AddScalar(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, f64::exp, Op::Exp(a))
    }

    /// Natural logarithm; every input must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(x) = self.data(a).iter().find(|x| !(**x > 0.0)) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive argument {x}"),
            });
        }
        self.unary("log", a, f64::ln, Op::Log(a))
    }

    /// `ln(max(x, eps))` for probabilities that may saturate at zero.
    /// Negative inputs are still a domain error. The gradient is zero where
    /// the clamp is active.
    pub fn log_clamped(&mut self, a: Var, eps: f64) -> Result<Var> {
        if let Some(x) = self.data(a).iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::Domain {
                op: "log_clamped",
                detail: format!("negative argument {x}"),
            });
        }
        self.unary("log_clamped", a, |x| x.max(eps).ln(), Op::LogClamped(a, eps))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary("clamp", a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    /// Softmax over the last axis, stabilised by subtracting the row maximum.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        let cols = *t.shape().last().unwrap_or(&1);
        let mut out = Vec::with_capacity(t.numel());
        for row in t.data().chunks(cols) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            out.extend(exps.iter().map(|e| e / total));
        }
        let value = Tensor::from_parts(t.shape().to_vec(), out);
        let rg = self.nodes[a.0].requires_grad;
        self.push("softmax", Op::Softmax(a), value, rg)
    }

    // ---- reductions ------------------------------------------------------

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.data(a).iter().sum();
        let rg = self.nodes[a.0].requires_grad;
        self.push("sum", Op::Sum(a), Tensor::scalar(s), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let d = self.data(a);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let rg = self.nodes[a.0].requires_grad;
        self.push("mean", Op::Mean(a), Tensor::scalar(m), rg)
    }

    pub fn squared_norm(&mut self, a: Var) -> Result<Var> {
        let s = self.data(a).iter().map(|x| x * x).sum();
        let rg = self.nodes[a.0].requires_grad;
        self.push("squared_norm", Op::SquaredNorm(a), Tensor::scalar(s), rg)
    }

    // ---- structural ------------------------------------------------------

    /// Matrix product. Accepts `[m,k]·[k,n]`, `[m,k]·[k]`, `[k]·[k,n]` and `[k]·[k]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k) = match sa.as_slice() {
            [k] => (1, *k),
            [m, k] => (*m, *k),
            _ => return Err(Error::dim("matmul", &sa, &sb)),
        };
        let (k2, n) = match sb.as_slice() {
            [k2] => (*k2, 1),
            [k2, n] => (*k2, *n),
            _ => return Err(Error::dim("matmul", &sa, &sb)),
        };
        if k != k2 {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let out = matmul_raw(self.data(a), self.data(b), m, k, n);
        let shape = match (sa.len(), sb.len()) {
            (2, 2) => vec![m, n],
            (2, 1) => vec![m],
            (1, 2) => vec![n],
            _ => vec![],
        };
        let rg = self.any_grad(&[a, b]);
        self.push("matmul", Op::MatMul(a, b), Tensor::from_parts(shape, out), rg)
    }

    /// Joins tensors along `axis`; all other axes must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Input("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::dim("concat", &base, &[axis]));
        }
        let mut axis_total = 0;
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::dim("concat", &base, s));
            }
            axis_total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * axis_total * inner);
        for o in 0..outer {
            for v in inputs {
                let len = self.shape(*v)[axis] * inner;
                out.extend_from_slice(&self.data(*v)[o * len..(o + 1) * len]);
            }
        }
        let mut shape = base;
        shape[axis] = axis_total;
        let rg = self.any_grad(inputs);
        self.push(
            "concat",
            Op::Concat(inputs.to_vec(), axis),
            Tensor::from_parts(shape, out),
            rg,
        )
    }

    /// Contiguous range `start..start+len` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::dim("slice", &shape, &[axis, start, len]));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let src = self.data(a);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * shape[axis] + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut new_shape = shape;
        new_shape[axis] = len;
        let rg = self.nodes[a.0].requires_grad;
        self.push(
            "slice",
            Op::Slice {
                input: a,
                axis,
                start,
            },
            Tensor::from_parts(new_shape, out),
            rg,
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.nodes[a.0].value.reshaped(shape)?;
        let rg = self.nodes[a.0].requires_grad;
        self.push("reshape", Op::Reshape(a), value, rg)
    }

    /// Row `i` of a matrix, as a vector.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let [rows, cols] = shape[..] else {
            return Err(Error::dim("row", &shape, &[i]));
        };
        if i >= rows {
            return Err(Error::dim("row", &shape, &[i]));
        }
        let data = self.data(a)[i * cols..(i + 1) * cols].to_vec();
        let rg = self.nodes[a.0].requires_grad;
        self.push("row", Op::Row(a, i), Tensor::from_parts(vec![cols], data), rg)
    }

    /// Rows of `table` selected by `ids`, stacked into `[ids.len(), cols]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        let [rows, cols] = shape[..] else {
            return Err(Error::dim("gather_rows", &shape, &[ids.len()]));
        };
        if ids.is_empty() {
            return Err(Error::Input("gather_rows with no ids".into()));
        }
        if let Some(bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::dim("gather_rows", &shape, &[*bad]));
        }
        let src = self.data(table);
        let data = ids
            .iter()
            .flat_map(|&i| src[i * cols..(i + 1) * cols].iter().copied())
            .collect();
        let rg = self.nodes[table.0].requires_grad;
        self.push(
            "gather_rows",
            Op::GatherRows(table, ids.to_vec()),
            Tensor::from_parts(vec![ids.len(), cols], data),
            rg,
        )
    }

    /// Stacks equal-shape vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let flat = self.concat(rows, 0)?;
        let cols = self.shape(rows[0]).iter().product::<usize>();
        self.reshape(flat, &[rows.len(), cols])
    }

    /// Valid (unpadded) stride-1 convolution over an `[H, W, C_in]` grid with a
    /// `[kh, kw, C_in, C_out]` kernel and `[C_out]` bias.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var> {
        let si = self.shape(input).to_vec();
        let sk = self.shape(kernel).to_vec();
        let (&[h, w, ci], &[kh, kw, kci, co]) = (&si[..], &sk[..]) else {
            return Err(Error::dim("conv2d", &si, &sk));
        };
        if kci != ci || h < kh || w < kw {
            return Err(Error::dim("conv2d", &si, &sk));
        }
        if self.shape(bias) != [co] {
            return Err(Error::dim("conv2d", &sk, self.shape(bias)));
        }
        let (ho, wo) = (h - kh + 1, w - kw + 1);
        let (x, k, b) = (self.data(input), self.data(kernel), self.data(bias));
        let mut out = vec![0.0; ho * wo * co];
        for y in 0..ho {
            for xx in 0..wo {
                let o_base = (y * wo + xx) * co;
                out[o_base..o_base + co].copy_from_slice(b);
                for dy in 0..kh {
                    for dx in 0..kw {
                        let i_base = ((y + dy) * w + xx + dx) * ci;
                        let k_base = (dy * kw + dx) * ci * co;
                        for c in 0..ci {
                            let xv = x[i_base + c];
                            let kr = &k[k_base + c * co..k_base + (c + 1) * co];
                            for (o, kv) in kr.iter().enumerate() {
                                out[o_base + o] += xv * kv;
                            }
                        }
                    }
                }
            }
        }
        let rg = self.any_grad(&[input, kernel, bias]);
        self.push(
            "conv2d",
            Op::Conv2d {
                input,
                kernel,
                bias,
            },
            Tensor::from_parts(vec![ho, wo, co], out),
            rg,
        )
    }

    /// Max-pools an `[H, W, C]` grid into a fixed `[out_h, out_w, C]` grid of
    /// (possibly overlapping) bins; the first maximum in a bin wins ties.
    pub fn adaptive_max_pool(&mut self, input: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let si = self.shape(input).to_vec();
        let [h, w, c] = si[..] else {
            return Err(Error::dim("adaptive_max_pool", &si, &[out_h, out_w]));
        };
        if h < out_h || w < out_w || out_h == 0 || out_w == 0 {
            return Err(Error::dim("adaptive_max_pool", &si, &[out_h, out_w]));
        }
        let x = self.data(input);
        let mut out = Vec::with_capacity(out_h * out_w * c);
        let mut argmax = Vec::with_capacity(out_h * out_w * c);
        for oy in 0..out_h {
            let (y0, y1) = (oy * h / out_h, ((oy + 1) * h).div_ceil(out_h));
            for ox in 0..out_w {
                let (x0, x1) = (ox * w / out_w, ((ox + 1) * w).div_ceil(out_w));
                for ch in 0..c {
                    let mut best = (y0 * w + x0) * c + ch;
                    for y in y0..y1 {
                        for xx in x0..x1 {
                            let idx = (y * w + xx) * c + ch;
                            if x[idx] > x[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        let rg = self.nodes[input.0].requires_grad;
        self.push(
            "adaptive_max_pool",
            Op::AdaptiveMaxPool { input, argmax },
            Tensor::from_parts(vec![out_h, out_w, c], out),
            rg,
        )
    }

    // ---- composites ------------------------------------------------------

    /// `w·x + b` for a `[out, in]` weight.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var> {
        let wx = self.matmul(w, x)?;
        self.add(wx, b)
    }

    // ---- differentiation -------------------------------------------------

    /// Accumulates `∂loss/∂node` into every node that requires a gradient.
    ///
    /// Gradients add up over repeated calls until [`Graph::zero_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let n = self.nodes[loss.0].value.numel();
        if n != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        if self.grads.len() < self.nodes.len() {
            self.grads.resize(self.nodes.len(), None);
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut local: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        local[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = local[i].take() else { continue };
            match &mut self.grads[i] {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(g.clone()),
            }
            propagate(&self.nodes, i, &g, &mut local);
        }
        Ok(())
    }

    /// Accumulated gradient of `v`, if any flowed into it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Adds the gradients of bound parameters into `store`.
    pub fn export_param_grads(&self, store: &mut ParamStore) {
        for (id, v) in &self.bound {
            if let Some(g) = self.grad(*v) {
                store.get_mut(*id).accumulate_grad(g);
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if *av == 0.0 {
                continue;
            }
            for (o, bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Mutable gradient buffer for `v`, or `None` when `v` needs no gradient.
fn slot<'a>(nodes: &[Node], local: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let n = nodes[v.0].value.numel();
    Some(local[v.0].get_or_insert_with(|| vec![0.0; n]))
}

fn reduce_into(buf: &mut [f64], g: &[f64], scale: impl Fn(usize) -> f64) {
    if buf.len() == 1 && g.len() != 1 {
        buf[0] += g.iter().enumerate().map(|(i, v)| v * scale(i)).sum::<f64>();
    } else {
        for (i, (b, v)) in buf.iter_mut().zip(g).enumerate() {
            *b += v * scale(i);
        }
    }
}

fn propagate(nodes: &[Node], i: usize, g: &[f64], local: &mut [Option<Vec<f64>>]) {
    let node = &nodes[i];
    let y = node.value.data();
    let val = |v: Var| nodes[v.0].value.data();
    // Value of a (possibly broadcast) operand at output index j.
    let at = |v: Var, j: usize| {
        let d = nodes[v.0].value.data();
        if d.len() == 1 {
            d[0]
        } else {
            d[j]
        }
    };
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |_| 1.0);
            }
            if let Some(buf) = slot(nodes, local, *b) {
                reduce_into(buf, g, |_| 1.0);
            }
        }
        Op::Sub(a, b) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |_| 1.0);
            }
            if let Some(buf) = slot(nodes, local, *b) {
                reduce_into(buf, g, |_| -1.0);
            }
        }
        Op::Mul(a, b) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| at(*b, j));
            }
            if let Some(buf) = slot(nodes, local, *b) {
                reduce_into(buf, g, |j| at(*a, j));
            }
        }
        Op::Div(a, b) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| 1.0 / at(*b, j));
            }
            if let Some(buf) = slot(nodes, local, *b) {
                reduce_into(buf, g, |j| {
                    let d = at(*b, j);
                    -at(*a, j) / (d * d)
                });
            }
        }
        Op::Neg(a) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |_| -1.0);
            }
        }
        Op::Scale(a, c) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |_| *c);
            }
        }
        Op::AddScalar(a) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |_| 1.0);
            }
        }
        Op::MatMul(a, b) => {
            let (sa, sb) = (nodes[a.0].value.shape(), nodes[b.0].value.shape());
            let (m, k) = if sa.len() == 1 { (1, sa[0]) } else { (sa[0], sa[1]) };
            let n = if sb.len() == 1 { 1 } else { sb[1] };
            let (av, bv) = (val(*a), val(*b));
            if let Some(buf) = slot(nodes, local, *a) {
                // dA[i,p] = Σ_j g[i,j]·B[p,j]
                for ii in 0..m {
                    let grow = &g[ii * n..(ii + 1) * n];
                    for p in 0..k {
                        let brow = &bv[p * n..(p + 1) * n];
                        buf[ii * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
            if let Some(buf) = slot(nodes, local, *b) {
                // dB[p,j] = Σ_i A[i,p]·g[i,j]
                for ii in 0..m {
                    let grow = &g[ii * n..(ii + 1) * n];
                    for p in 0..k {
                        let a_ip = av[ii * k + p];
                        if a_ip == 0.0 {
                            continue;
                        }
                        for (o, gv) in buf[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *o += a_ip * gv;
                        }
                    }
                }
            }
        }
        Op::Concat(inputs, axis) => {
            let shape = node.value.shape();
            let outer: usize = shape[..*axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let total = shape[*axis] * inner;
            let mut offset = 0;
            for v in inputs {
                let len = nodes[v.0].value.shape()[*axis] * inner;
                if let Some(buf) = slot(nodes, local, *v) {
                    for o in 0..outer {
                        let src = &g[o * total + offset..o * total + offset + len];
                        for (b, s) in buf[o * len..(o + 1) * len].iter_mut().zip(src) {
                            *b += s;
                        }
                    }
                }
                offset += len;
            }
        }
        Op::Slice { input, axis, start } => {
            let in_shape = nodes[input.0].value.shape();
            let outer: usize = in_shape[..*axis].iter().product();
            let inner: usize = in_shape[axis + 1..].iter().product();
            let len = node.value.shape()[*axis];
            if let Some(buf) = slot(nodes, local, *input) {
                for o in 0..outer {
                    let base = (o * in_shape[*axis] + start) * inner;
                    let src = &g[o * len * inner..(o + 1) * len * inner];
                    for (b, s) in buf[base..base + len * inner].iter_mut().zip(src) {
                        *b += s;
                    }
                }
            }
        }
        Op::Reshape(a) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |_| 1.0);
            }
        }
        Op::Row(a, r) => {
            let cols = g.len();
            if let Some(buf) = slot(nodes, local, *a) {
                for (b, s) in buf[r * cols..(r + 1) * cols].iter_mut().zip(g) {
                    *b += s;
                }
            }
        }
        Op::GatherRows(table, ids) => {
            let cols = nodes[table.0].value.shape()[1];
            if let Some(buf) = slot(nodes, local, *table) {
                for (pos, &r) in ids.iter().enumerate() {
                    let src = &g[pos * cols..(pos + 1) * cols];
                    for (b, s) in buf[r * cols..(r + 1) * cols].iter_mut().zip(src) {
                        *b += s;
                    }
                }
            }
        }
        Op::Sum(a) => {
            if let Some(buf) = slot(nodes, local, *a) {
                buf.iter_mut().for_each(|b| *b += g[0]);
            }
        }
        Op::Mean(a) => {
            if let Some(buf) = slot(nodes, local, *a) {
                let share = g[0] / buf.len() as f64;
                buf.iter_mut().for_each(|b| *b += share);
            }
        }
        Op::Exp(a) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| y[j]);
            }
        }
        Op::Log(a) => {
            let x = val(*a);
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| 1.0 / x[j]);
            }
        }
        Op::LogClamped(a, eps) => {
            let x = val(*a);
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| if x[j] > *eps { 1.0 / x[j] } else { 0.0 });
            }
        }
        Op::Tanh(a) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| 1.0 - y[j] * y[j]);
            }
        }
        Op::Sigmoid(a) => {
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| y[j] * (1.0 - y[j]));
            }
        }
        Op::Relu(a) => {
            let x = val(*a);
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| if x[j] > 0.0 { 1.0 } else { 0.0 });
            }
        }
        Op::Clamp(a, lo, hi) => {
            let x = val(*a);
            if let Some(buf) = slot(nodes, local, *a) {
                reduce_into(buf, g, |j| if x[j] >= *lo && x[j] <= *hi { 1.0 } else { 0.0 });
            }
        }
        Op::Softmax(a) => {
            let cols = *node.value.shape().last().unwrap_or(&1);
            if let Some(buf) = slot(nodes, local, *a) {
                for ((brow, yrow), grow) in buf
                    .chunks_mut(cols)
                    .zip(y.chunks(cols))
                    .zip(g.chunks(cols))
                {
                    let dot: f64 = yrow.iter().zip(grow).map(|(p, q)| p * q).sum();
                    for ((b, yv), gv) in brow.iter_mut().zip(yrow).zip(grow) {
                        *b += yv * (gv - dot);
                    }
                }
            }
        }
        Op::SquaredNorm(a) => {
            let x = val(*a);
            if let Some(buf) = slot(nodes, local, *a) {
                for (b, xv) in buf.iter_mut().zip(x) {
                    *b += 2.0 * xv * g[0];
                }
            }
        }
        Op::Conv2d {
            input,
            kernel,
            bias,
        } => {
            let si = nodes[input.0].value.shape();
            let sk = nodes[kernel.0].value.shape();
            let (w, ci) = (si[1], si[2]);
            let (kh, kw, co) = (sk[0], sk[1], sk[3]);
            let so = node.value.shape();
            let (ho, wo) = (so[0], so[1]);
            let (x, k) = (val(*input), val(*kernel));
            if let Some(buf) = slot(nodes, local, *bias) {
                for cell in g.chunks(co) {
                    for (b, gv) in buf.iter_mut().zip(cell) {
                        *b += gv;
                    }
                }
            }
            if let Some(buf) = slot(nodes, local, *kernel) {
                for yy in 0..ho {
                    for xx in 0..wo {
                        let gcell = &g[(yy * wo + xx) * co..(yy * wo + xx + 1) * co];
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let i_base = ((yy + dy) * w + xx + dx) * ci;
                                let k_base = (dy * kw + dx) * ci * co;
                                for c in 0..ci {
                                    let xv = x[i_base + c];
                                    let krow = &mut buf[k_base + c * co..k_base + (c + 1) * co];
                                    for (kb, gv) in krow.iter_mut().zip(gcell) {
                                        *kb += xv * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if let Some(buf) = slot(nodes, local, *input) {
                for yy in 0..ho {
                    for xx in 0..wo {
                        let gcell = &g[(yy * wo + xx) * co..(yy * wo + xx + 1) * co];
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let i_base = ((yy + dy) * w + xx + dx) * ci;
                                let k_base = (dy * kw + dx) * ci * co;
                                for c in 0..ci {
                                    let krow = &k[k_base + c * co..k_base + (c + 1) * co];
                                    buf[i_base + c] +=
                                        krow.iter().zip(gcell).map(|(a, b)| a * b).sum::<f64>();
                                }
                            }
                        }
                    }
                }
            }
        }
        Op::AdaptiveMaxPool { input, argmax } => {
            if let Some(buf) = slot(nodes, local, *input) {
                for (src, gv) in argmax.iter().zip(g) {
                    buf[*src] += gv;
                }
            }
        }
    }
}
