//! Gated recurrent unit over whole sequences, with hand-written
//! backpropagation through time.
//!
//! Gate layout along the `3H` axis is `[reset, update, candidate]`:
//!
//! ```text
//! r = sigmoid(x Wr + br + h Ur + cr)
//! z = sigmoid(x Wz + bz + h Uz + cz)
//! n = tanh(x Wn + bn + r * (h Un + cn))
//! h' = (1 - z) * n + z * h
//! ```

use super::activation::sigmoid_scalar;
use crate::scalar::Real;

/// Per-step values kept for the backward pass, each `[B, W, H]`.
#[derive(Debug, Clone)]
pub struct GruCache<T> {
    pub reset: Vec<T>,
    pub update: Vec<T>,
    pub candidate: Vec<T>,
    pub hidden_n: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct GruDims {
    pub batch: usize,
    pub steps: usize,
    pub input: usize,
    pub hidden: usize,
}

/// Runs the recurrence from a zero state. Returns all hidden states
/// `[B, W, H]` and the cache.
pub fn gru_forward<T: Real>(
    x: &[T],
    w_ih: &[T],
    w_hh: &[T],
    b_ih: &[T],
    b_hh: &[T],
    d: &GruDims,
) -> (Vec<T>, GruCache<T>) {
    let (bs, steps, din, h) = (d.batch, d.steps, d.input, d.hidden);
    let g3 = 3 * h;
    let total = bs * steps * h;
    let mut out = vec![T::zero(); total];
    let mut cache = GruCache {
        reset: vec![T::zero(); total],
        update: vec![T::zero(); total],
        candidate: vec![T::zero(); total],
        hidden_n: vec![T::zero(); total],
    };
    let mut gi = vec![T::zero(); g3];
    let mut gh = vec![T::zero(); g3];
    let zero_state = vec![T::zero(); h];
    for b in 0..bs {
        for t in 0..steps {
            let xt = &x[(b * steps + t) * din..(b * steps + t + 1) * din];
            gi.copy_from_slice(b_ih);
            for (k, &xv) in xt.iter().enumerate() {
                for (g, &wv) in gi.iter_mut().zip(&w_ih[k * g3..(k + 1) * g3]) {
                    *g += xv * wv;
                }
            }
            let base = (b * steps + t) * h;
            let prev: Vec<T> = if t == 0 { zero_state.clone() } else { out[base - h..base].to_vec() };
            gh.copy_from_slice(b_hh);
            for (k, &hv) in prev.iter().enumerate() {
                for (g, &wv) in gh.iter_mut().zip(&w_hh[k * g3..(k + 1) * g3]) {
                    *g += hv * wv;
                }
            }
            for j in 0..h {
                let r = sigmoid_scalar(gi[j] + gh[j]);
                let z = sigmoid_scalar(gi[h + j] + gh[h + j]);
                let n = (gi[2 * h + j] + r * gh[2 * h + j]).tanh();
                cache.reset[base + j] = r;
                cache.update[base + j] = z;
                cache.candidate[base + j] = n;
                cache.hidden_n[base + j] = gh[2 * h + j];
                out[base + j] = (T::one() - z) * n + z * prev[j];
            }
        }
    }
    (out, cache)
}

pub struct GruGrads<'a, T> {
    pub dx: &'a mut [T],
    pub dw_ih: &'a mut [T],
    pub dw_hh: &'a mut [T],
    pub db_ih: &'a mut [T],
    pub db_hh: &'a mut [T],
}

/// Accumulates gradients given `dy`, the gradient w.r.t. every hidden state.
#[allow(clippy::too_many_arguments)]
pub fn gru_backward<T: Real>(
    dy: &[T],
    x: &[T],
    out: &[T],
    w_ih: &[T],
    w_hh: &[T],
    cache: &GruCache<T>,
    d: &GruDims,
    grads: GruGrads<'_, T>,
) {
    let (bs, steps, din, h) = (d.batch, d.steps, d.input, d.hidden);
    let g3 = 3 * h;
    let mut dgi = vec![T::zero(); g3];
    let mut dgh = vec![T::zero(); g3];
    let mut carry = vec![T::zero(); h];
    let mut dprev = vec![T::zero(); h];
    for b in 0..bs {
        carry.iter_mut().for_each(|v| *v = T::zero());
        for t in (0..steps).rev() {
            let base = (b * steps + t) * h;
            for j in 0..h {
                let dh = dy[base + j] + carry[j];
                let r = cache.reset[base + j];
                let z = cache.update[base + j];
                let n = cache.candidate[base + j];
                let hn = cache.hidden_n[base + j];
                let hp = if t == 0 { T::zero() } else { out[base - h + j] };
                let dn = dh * (T::one() - z);
                let dz = dh * (hp - n);
                dprev[j] = dh * z;
                let da_n = dn * (T::one() - n * n);
                let da_z = dz * z * (T::one() - z);
                let da_r = da_n * hn * r * (T::one() - r);
                dgi[j] = da_r;
                dgi[h + j] = da_z;
                dgi[2 * h + j] = da_n;
                dgh[j] = da_r;
                dgh[h + j] = da_z;
                dgh[2 * h + j] = da_n * r;
            }
            let xrow = (b * steps + t) * din;
            for k in 0..din {
                let wrow = &w_ih[k * g3..(k + 1) * g3];
                let dwrow = &mut grads.dw_ih[k * g3..(k + 1) * g3];
                let xv = x[xrow + k];
                let mut acc = T::zero();
                for g in 0..g3 {
                    acc += dgi[g] * wrow[g];
                    dwrow[g] += xv * dgi[g];
                }
                grads.dx[xrow + k] += acc;
            }
            for g in 0..g3 {
                grads.db_ih[g] += dgi[g];
                grads.db_hh[g] += dgh[g];
            }
            for k in 0..h {
                let wrow = &w_hh[k * g3..(k + 1) * g3];
                let hp = if t == 0 { T::zero() } else { out[base - h + k] };
                let mut acc = T::zero();
                if t > 0 {
                    let dwrow = &mut grads.dw_hh[k * g3..(k + 1) * g3];
                    for g in 0..g3 {
                        dwrow[g] += hp * dgh[g];
                    }
                }
                for g in 0..g3 {
                    acc += dgh[g] * wrow[g];
                }
                carry[k] = dprev[k] + acc;
            }
        }
    }
}
