//! Recording tape for reverse-mode differentiation.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::activation::{gelu_grad, gelu_scalar, leaky_scalar, sigmoid_scalar, softmax_rows};
use super::attention::{attention_backward, attention_forward, AttentionCache, Neighborhoods};
use super::gru::{gru_backward, gru_forward, GruCache, GruDims, GruGrads};
use super::linear::*;
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Unary {
    Gelu,
    Sigmoid,
    Tanh,
    Leaky(f64),
}

#[derive(Debug, Clone, Copy)]
struct ConvDims {
    batch: usize,
    width: usize,
    ci: usize,
    k: usize,
    co: usize,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Dense { x: Var, w: Var, b: Var, n: usize, din: usize, dout: usize },
    Conv { x: Var, k: Var, b: Var, dims: ConvDims, transpose: bool },
    Gru { x: Var, w_ih: Var, w_hh: Var, b_ih: Var, b_hh: Var, dims: GruDims, cache: Box<GruCache<T>> },
    Unary { x: Var, kind: Unary },
    Add(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Reshape(Var),
    ConcatRows(Vec<Var>),
    ConcatCols { parts: Vec<Var>, widths: Vec<usize>, rows: usize },
    GatherRows { x: Var, index: Vec<usize>, width: usize },
    Softmax { x: Var, width: usize },
    Attention { g: Var, att: Var, nb: Arc<Neighborhoods>, heads: usize, width: usize, slope: T, cache: Box<AttentionCache<T>> },
    WeightedBce { p: Var, targets: Vec<T>, weights: Vec<T> },
    SquaredError { x: Var, target: Vec<T> },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Lower clamp applied to probabilities inside the cross-entropy.
pub const PROB_EPS: f64 = 1e-12;

/// A single forward pass. Create one per evaluation, call [`Tape::backward`]
/// on the scalar loss, then drop it.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: BTreeMap<String, Var>,
}

fn shape_err<R>(msg: String) -> Result<R> {
    Err(Error::Shape(msg))
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: BTreeMap::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a constant input.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a named parameter. Repeated calls with the same name return
    /// the same variable so gradients accumulate in one place.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store.value(name)?.clone();
        let v = self.push(value, Op::Leaf);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// `x[*, in] . w[in, out] + b[out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if ws.len() != 2 || bs != [ws[1]] || xs.last() != Some(&ws[0]) {
            return shape_err(format!("dense: x {xs:?}, w {ws:?}, b {bs:?}"));
        }
        let (din, dout) = (ws[0], ws[1]);
        let n = self.value(x).len() / din;
        let mut shape = xs.to_vec();
        *shape.last_mut().unwrap() = dout;
        let y = dense_forward(self.value(x).data(), self.value(w).data(), self.value(b).data(), n, din, dout);
        Ok(self.push(Tensor::new(shape, y)?, Op::Dense { x, w, b, n, din, dout }))
    }

    fn conv_dims(&self, x: Var, k: Var, b: Var, transpose: bool) -> Result<ConvDims> {
        let (xs, ks, bs) = (self.value(x).shape(), self.value(k).shape(), self.value(b).shape());
        let name = if transpose { "conv1d_transpose" } else { "conv1d" };
        if !(2..=3).contains(&xs.len()) || ks.len() != 3 {
            return shape_err(format!("{name}: x {xs:?}, kernels {ks:?}"));
        }
        let (batch, width, ci) = if xs.len() == 3 { (xs[0], xs[1], xs[2]) } else { (1, xs[0], xs[1]) };
        let (kw, k_in, k_out) = if transpose { (ks[0], ks[2], ks[1]) } else { (ks[0], ks[1], ks[2]) };
        if k_in != ci || bs != [k_out] || kw == 0 {
            return shape_err(format!("{name}: x {xs:?}, kernels {ks:?}, bias {bs:?}"));
        }
        if !transpose && kw > width {
            return shape_err(format!("conv1d: kernel width {kw} exceeds input length {width}"));
        }
        Ok(ConvDims { batch, width, ci, k: kw, co: k_out })
    }

    fn conv_shape(&self, x: Var, d: &ConvDims, out_width: usize) -> Vec<usize> {
        if self.value(x).rank() == 3 {
            vec![d.batch, out_width, d.co]
        } else {
            vec![out_width, d.co]
        }
    }

    /// Valid 1-D cross-correlation over `x` of shape `[W, C_in]` or
    /// `[B, W, C_in]` with kernels `[k, C_in, C_out]`.
    pub fn conv1d(&mut self, x: Var, k: Var, b: Var) -> Result<Var> {
        let d = self.conv_dims(x, k, b, false)?;
        let y = conv1d_forward(self.value(x).data(), self.value(k).data(), self.value(b).data(), d.batch, d.width, d.ci, d.k, d.co);
        let shape = self.conv_shape(x, &d, d.width + 1 - d.k);
        Ok(self.push(Tensor::new(shape, y)?, Op::Conv { x, k, b, dims: d, transpose: false }))
    }

    /// Adjoint of [`Tape::conv1d`]: kernels `[k, C_out, C_in]` map
    /// `[W', C_in]` to `[W'+k-1, C_out]`.
    pub fn conv1d_transpose(&mut self, x: Var, k: Var, b: Var) -> Result<Var> {
        let d = self.conv_dims(x, k, b, true)?;
        let y = conv1d_transpose_forward(self.value(x).data(), self.value(k).data(), self.value(b).data(), d.batch, d.width, d.ci, d.k, d.co);
        let shape = self.conv_shape(x, &d, d.width + d.k - 1);
        Ok(self.push(Tensor::new(shape, y)?, Op::Conv { x, k, b, dims: d, transpose: true }))
    }

    /// All hidden states of a GRU run from a zero state over `x` of shape
    /// `[W, D]` or `[B, W, D]`. Weights are `w_ih [D, 3H]`, `w_hh [H, 3H]`,
    /// biases `[3H]`.
    pub fn gru(&mut self, x: Var, w_ih: Var, w_hh: Var, b_ih: Var, b_hh: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let (wi, wh) = (self.value(w_ih).shape(), self.value(w_hh).shape());
        let (bi, bh) = (self.value(b_ih).shape(), self.value(b_hh).shape());
        let (batch, steps, input) = match xs.as_slice() {
            [w, d] => (1, *w, *d),
            [b, w, d] => (*b, *w, *d),
            _ => return shape_err(format!("gru: input {xs:?}")),
        };
        if wh.len() != 2 || wh[1] != 3 * wh[0] || wi != [input, wh[1]] || bi != [wh[1]] || bh != [wh[1]] {
            return shape_err(format!("gru: x {xs:?}, w_ih {wi:?}, w_hh {wh:?}, b_ih {bi:?}, b_hh {bh:?}"));
        }
        let hidden = wh[0];
        let dims = GruDims { batch, steps, input, hidden };
        let (y, cache) = gru_forward(
            self.value(x).data(),
            self.value(w_ih).data(),
            self.value(w_hh).data(),
            self.value(b_ih).data(),
            self.value(b_hh).data(),
            &dims,
        );
        let mut shape = xs;
        *shape.last_mut().unwrap() = hidden;
        Ok(self.push(Tensor::new(shape, y)?, Op::Gru { x, w_ih, w_hh, b_ih, b_hh, dims, cache: Box::new(cache) }))
    }

    pub fn unary(&mut self, x: Var, kind: Unary) -> Var {
        let v = self.value(x);
        let y = match kind {
            Unary::Gelu => v.map(gelu_scalar),
            Unary::Sigmoid => v.map(sigmoid_scalar),
            Unary::Tanh => v.map(|a| a.tanh()),
            Unary::Leaky(s) => v.map(|a| leaky_scalar(a, T::lit(s))),
        };
        self.push(y, Op::Unary { x, kind })
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Gelu)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Tanh)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, Unary::Leaky(slope))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return shape_err(format!("add: {:?} vs {:?}", av.shape(), bv.shape()));
        }
        let mut y = av.clone();
        y.add_assign(bv);
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let y = self.value(x).map(|v| v * c);
        self.push(y, Op::Scale(x, c))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: T = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len().max(1);
        let s = self.sum(x);
        self.scale(s, T::one() / T::lit(n as f64))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(y, Op::Reshape(x)))
    }

    /// Concatenates along the leading axis; trailing shapes must agree.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return shape_err("concat_rows: no parts".into());
        };
        let tail = self.value(first).shape()[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.shape()[1..] != tail[..] {
                return shape_err(format!("concat_rows: {:?} vs trailing {tail:?}", v.shape()));
            }
            lead += v.shape()[0];
            data.extend_from_slice(v.data());
        }
        let mut shape = vec![lead];
        shape.extend(tail);
        Ok(self.push(Tensor::new(shape, data)?, Op::ConcatRows(parts.to_vec())))
    }

    /// Concatenates matrices `[n, w_i]` into `[n, sum w_i]`.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return shape_err("concat_cols: no parts".into());
        };
        let rows = self.value(first).shape()[0];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != 2 || s[0] != rows {
                return shape_err(format!("concat_cols: {s:?} with {rows} rows"));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        Ok(self.push(Tensor::new(vec![rows, total], data)?, Op::ConcatCols { parts: parts.to_vec(), widths, rows }))
    }

    /// Picks rows of a `[n, w]` matrix; rows may repeat.
    pub fn gather_rows(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let v = self.value(x);
        if v.rank() != 2 {
            return shape_err(format!("gather_rows: rank {} input", v.rank()));
        }
        let (n, width) = (v.shape()[0], v.shape()[1]);
        let mut data = Vec::with_capacity(index.len() * width);
        for &i in index {
            if i >= n {
                return shape_err(format!("gather_rows: row {i} of {n}"));
            }
            data.extend_from_slice(&v.data()[i * width..(i + 1) * width]);
        }
        let y = Tensor::new(vec![index.len(), width], data)?;
        Ok(self.push(y, Op::GatherRows { x, index: index.to_vec(), width }))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let width = v.last_dim();
        let y = Tensor::new(v.shape().to_vec(), softmax_rows(v.data(), width)).expect("same shape");
        self.push(y, Op::Softmax { x, width })
    }

    /// Multi-head graph attention over pre-transformed features
    /// `g [N, heads * width]` with attention vectors `att [heads, 2 * width]`.
    pub fn graph_attention(&mut self, g: Var, att: Var, nb: Arc<Neighborhoods>, heads: usize, slope: f64) -> Result<Var> {
        let (gs, as_) = (self.value(g).shape(), self.value(att).shape());
        if as_.len() != 2 || as_[0] != heads || as_[1] % 2 != 0 {
            return shape_err(format!("graph_attention: attention vectors {as_:?} for {heads} heads"));
        }
        let width = as_[1] / 2;
        if gs != [nb.vertex_count(), heads * width] {
            return shape_err(format!("graph_attention: features {gs:?}, {} vertices, width {}", nb.vertex_count(), heads * width));
        }
        let slope = T::lit(slope);
        let (y, cache) = attention_forward(self.value(g).data(), self.value(att).data(), &nb, heads, width, slope);
        let y = Tensor::new(gs.to_vec(), y)?;
        Ok(self.push(y, Op::Attention { g, att, nb, heads, width, slope, cache: Box::new(cache) }))
    }

    /// `sum_i w_i * BCE(p_i, y_i)` with `p` clamped to `[eps, 1 - eps]`.
    pub fn weighted_bce(&mut self, p: Var, targets: &[T], weights: &[T]) -> Result<Var> {
        let pv = self.value(p);
        if pv.len() != targets.len() || pv.len() != weights.len() {
            return shape_err(format!("weighted_bce: {} scores, {} targets, {} weights", pv.len(), targets.len(), weights.len()));
        }
        let eps = T::lit(PROB_EPS);
        let mut total = T::zero();
        for ((&pi, &y), &w) in pv.data().iter().zip(targets).zip(weights) {
            let q = pi.max(eps).min(T::one() - eps);
            total -= w * (y * q.ln() + (T::one() - y) * (T::one() - q).ln());
        }
        Ok(self.push(Tensor::scalar(total), Op::WeightedBce { p, targets: targets.to_vec(), weights: weights.to_vec() }))
    }

    /// `sum_i (x_i - target_i)^2`.
    pub fn squared_error(&mut self, x: Var, target: &[T]) -> Result<Var> {
        let xv = self.value(x);
        if xv.len() != target.len() {
            return shape_err(format!("squared_error: {} values vs {} targets", xv.len(), target.len()));
        }
        let s: T = xv.data().iter().zip(target).map(|(&a, &b)| (a - b) * (a - b)).sum();
        Ok(self.push(Tensor::scalar(s), Op::SquaredError { x, target: target.to_vec() }))
    }

    /// Reverse sweep from a single-element output.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        let out = self.value(output);
        if out.len() != 1 {
            return shape_err(format!("backward needs a scalar output, got shape {:?}", out.shape()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(vec![T::one()]);
        for idx in (0..=output.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            self.backprop_node(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        let params = self
            .params
            .iter()
            .filter_map(|(name, v)| {
                let shape = self.value(*v).shape().to_vec();
                let g = grads[v.0].take().unwrap_or_else(|| vec![T::zero(); self.value(*v).len()]);
                Some((name.clone(), Tensor::new(shape, g).ok()?))
            })
            .collect();
        Ok(Gradients { nodes: grads, params })
    }

    fn backprop_node(&self, idx: usize, dy: &[T], grads: &mut [Option<Vec<T>>]) {
        let zeros = |v: Var| vec![T::zero(); self.value(v).len()];
        let val = |v: Var| self.value(v).data();
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Dense { x, w, b, n, din, dout } => {
                let (mut dx, mut dw, mut db) = (zeros(*x), zeros(*w), zeros(*b));
                dense_backward(dy, val(*x), val(*w), *n, *din, *dout, &mut dx, &mut dw, &mut db);
                accumulate(grads, *x, dx);
                accumulate(grads, *w, dw);
                accumulate(grads, *b, db);
            }
            Op::Conv { x, k, b, dims: d, transpose } => {
                let (mut dx, mut dk, mut db) = (zeros(*x), zeros(*k), zeros(*b));
                let f = if *transpose { conv1d_transpose_backward } else { conv1d_backward };
                f(dy, val(*x), val(*k), d.batch, d.width, d.ci, d.k, d.co, &mut dx, &mut dk, &mut db);
                accumulate(grads, *x, dx);
                accumulate(grads, *k, dk);
                accumulate(grads, *b, db);
            }
            Op::Gru { x, w_ih, w_hh, b_ih, b_hh, dims, cache } => {
                let (mut dx, mut dwi, mut dwh) = (zeros(*x), zeros(*w_ih), zeros(*w_hh));
                let (mut dbi, mut dbh) = (zeros(*b_ih), zeros(*b_hh));
                gru_backward(
                    dy,
                    val(*x),
                    self.nodes[idx].value.data(),
                    val(*w_ih),
                    val(*w_hh),
                    cache,
                    dims,
                    GruGrads { dx: &mut dx, dw_ih: &mut dwi, dw_hh: &mut dwh, db_ih: &mut dbi, db_hh: &mut dbh },
                );
                accumulate(grads, *x, dx);
                accumulate(grads, *w_ih, dwi);
                accumulate(grads, *w_hh, dwh);
                accumulate(grads, *b_ih, dbi);
                accumulate(grads, *b_hh, dbh);
            }
            Op::Unary { x, kind } => {
                let xs = val(*x);
                let ys = self.nodes[idx].value.data();
                let dx: Vec<T> = match kind {
                    Unary::Gelu => xs.iter().zip(dy).map(|(&a, &g)| g * gelu_grad(a)).collect(),
                    Unary::Sigmoid => ys.iter().zip(dy).map(|(&s, &g)| g * s * (T::one() - s)).collect(),
                    Unary::Tanh => ys.iter().zip(dy).map(|(&t, &g)| g * (T::one() - t * t)).collect(),
                    Unary::Leaky(s) => {
                        let s = T::lit(*s);
                        xs.iter().zip(dy).map(|(&a, &g)| if a > T::zero() { g } else { g * s }).collect()
                    }
                };
                accumulate(grads, *x, dx);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, dy.to_vec());
                accumulate(grads, *b, dy.to_vec());
            }
            Op::Scale(x, c) => accumulate(grads, *x, dy.iter().map(|&g| g * *c).collect()),
            Op::Sum(x) => accumulate(grads, *x, vec![dy[0]; self.value(*x).len()]),
            Op::Reshape(x) => accumulate(grads, *x, dy.to_vec()),
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    accumulate(grads, p, dy[off..off + n].to_vec());
                    off += n;
                }
            }
            Op::ConcatCols { parts, widths, rows } => {
                let total: usize = widths.iter().sum();
                let mut off = 0;
                for (&p, &w) in parts.iter().zip(widths) {
                    let mut g = Vec::with_capacity(rows * w);
                    for r in 0..*rows {
                        g.extend_from_slice(&dy[r * total + off..r * total + off + w]);
                    }
                    accumulate(grads, p, g);
                    off += w;
                }
            }
            Op::GatherRows { x, index, width } => {
                let mut dx = zeros(*x);
                for (r, &i) in index.iter().enumerate() {
                    for c in 0..*width {
                        dx[i * width + c] += dy[r * width + c];
                    }
                }
                accumulate(grads, *x, dx);
            }
            Op::Softmax { x, width } => {
                let ys = self.nodes[idx].value.data();
                let mut dx = Vec::with_capacity(ys.len());
                for (yr, gr) in ys.chunks(*width).zip(dy.chunks(*width)) {
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    dx.extend(yr.iter().zip(gr).map(|(&a, &b)| a * (b - dot)));
                }
                accumulate(grads, *x, dx);
            }
            Op::Attention { g, att, nb, heads, width, slope, cache } => {
                let (mut dg, mut da) = (zeros(*g), zeros(*att));
                attention_backward(dy, val(*g), val(*att), nb, *heads, *width, *slope, cache, &mut dg, &mut da);
                accumulate(grads, *g, dg);
                accumulate(grads, *att, da);
            }
            Op::WeightedBce { p, targets, weights } => {
                let eps = T::lit(PROB_EPS);
                let dx = val(*p)
                    .iter()
                    .zip(targets.iter().zip(weights))
                    .map(|(&pi, (&y, &w))| {
                        let q = pi.max(eps).min(T::one() - eps);
                        dy[0] * w * ((T::one() - y) / (T::one() - q) - y / q)
                    })
                    .collect();
                accumulate(grads, *p, dx);
            }
            Op::SquaredError { x, target } => {
                let two = T::lit(2.0);
                let dx = val(*x).iter().zip(target).map(|(&a, &t)| dy[0] * two * (a - t)).collect();
                accumulate(grads, *x, dx);
            }
        }
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, delta: Vec<T>) {
    match &mut grads[v.0] {
        Some(g) => {
            for (a, b) in g.iter_mut().zip(delta) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

/// Result of a reverse sweep.
#[derive(Debug)]
pub struct Gradients<T> {
    nodes: Vec<Option<Vec<T>>>,
    params: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient with respect to any recorded variable (zeros if unreached).
    pub fn of(&self, v: Var) -> Option<&[T]> {
        self.nodes.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<String, Tensor<T>> {
        self.params
    }
}
