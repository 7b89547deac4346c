//! Fused multi-head graph-attention aggregation.
//!
//! Input `g` is `[N, heads * width]` (already linearly transformed), the
//! attention vectors are `[heads, 2 * width]`. For vertex `i` and head `m`
//! the logit of neighbour `j` is `leaky(a_m . [g_i,m ; g_j,m])`; weights are
//! a softmax over the closed neighbourhood and the output is the weighted
//! sum of `g_j,m`.

use super::activation::leaky_scalar;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Closed neighbourhoods in compressed-row form. Every vertex lists itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl Neighborhoods {
    /// Builds closed neighbourhoods from open adjacency lists.
    pub fn closed(adjacency: &[Vec<usize>]) -> Result<Self> {
        let n = adjacency.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut members = Vec::new();
        offsets.push(0);
        for (i, adj) in adjacency.iter().enumerate() {
            let mut row: Vec<usize> = adj.iter().copied().filter(|&j| j != i).collect();
            if let Some(&bad) = row.iter().find(|&&j| j >= n) {
                return Err(Error::Shape(format!("neighbour index {bad} out of range for {n} vertices")));
            }
            row.push(i);
            row.sort_unstable();
            row.dedup();
            members.extend(row);
            offsets.push(members.len());
        }
        Ok(Self { offsets, members })
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.members[self.offsets[i]..self.offsets[i + 1]]
    }

    fn slot_count(&self) -> usize {
        self.members.len()
    }

    /// Disjoint union; indices of `other` are shifted past `self`.
    pub fn disjoint_union(parts: &[Neighborhoods]) -> Self {
        let mut offsets = vec![0];
        let mut members = Vec::new();
        let mut shift = 0;
        for p in parts {
            for i in 0..p.vertex_count() {
                members.extend(p.of(i).iter().map(|j| j + shift));
                offsets.push(members.len());
            }
            shift += p.vertex_count();
        }
        Self { offsets, members }
    }
}

/// Per-slot values reused by the backward pass, laid out `[slot, head]`.
#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    pub logits: Vec<T>,
    pub weights: Vec<T>,
}

pub fn attention_forward<T: Real>(
    g: &[T],
    att: &[T],
    nb: &Neighborhoods,
    heads: usize,
    width: usize,
    slope: T,
) -> (Vec<T>, AttentionCache<T>) {
    let n = nb.vertex_count();
    let d = heads * width;
    let mut out = vec![T::zero(); n * d];
    let mut logits = vec![T::zero(); nb.slot_count() * heads];
    let mut weights = vec![T::zero(); nb.slot_count() * heads];
    for i in 0..n {
        let lo = nb.offsets[i];
        let members = nb.of(i);
        for m in 0..heads {
            let a_src = &att[m * 2 * width..m * 2 * width + width];
            let a_dst = &att[m * 2 * width + width..(m + 1) * 2 * width];
            let gi = &g[i * d + m * width..i * d + (m + 1) * width];
            let self_term: T = a_src.iter().zip(gi).map(|(&a, &x)| a * x).sum();
            let mut max = T::neg_infinity();
            for (s, &j) in members.iter().enumerate() {
                let gj = &g[j * d + m * width..j * d + (m + 1) * width];
                let raw = self_term + a_dst.iter().zip(gj).map(|(&a, &x)| a * x).sum::<T>();
                logits[(lo + s) * heads + m] = raw;
                max = max.max(leaky_scalar(raw, slope));
            }
            let mut total = T::zero();
            for s in 0..members.len() {
                let e = (leaky_scalar(logits[(lo + s) * heads + m], slope) - max).exp();
                weights[(lo + s) * heads + m] = e;
                total += e;
            }
            for (s, &j) in members.iter().enumerate() {
                let w = weights[(lo + s) * heads + m] / total;
                weights[(lo + s) * heads + m] = w;
                let gj = &g[j * d + m * width..j * d + (m + 1) * width];
                let oi = &mut out[i * d + m * width..i * d + (m + 1) * width];
                for (o, &x) in oi.iter_mut().zip(gj) {
                    *o += w * x;
                }
            }
        }
    }
    (out, AttentionCache { logits, weights })
}

#[allow(clippy::too_many_arguments)]
pub fn attention_backward<T: Real>(
    dout: &[T],
    g: &[T],
    att: &[T],
    nb: &Neighborhoods,
    heads: usize,
    width: usize,
    slope: T,
    cache: &AttentionCache<T>,
    dg: &mut [T],
    datt: &mut [T],
) {
    let n = nb.vertex_count();
    let d = heads * width;
    let mut dalpha = Vec::new();
    for i in 0..n {
        let lo = nb.offsets[i];
        let members = nb.of(i);
        for m in 0..heads {
            let hs = m * width..(m + 1) * width;
            let di = &dout[i * d + hs.start..i * d + hs.end];
            dalpha.clear();
            let mut mix = T::zero();
            for (s, &j) in members.iter().enumerate() {
                let gj = &g[j * d + hs.start..j * d + hs.end];
                let da: T = di.iter().zip(gj).map(|(&a, &b)| a * b).sum();
                let w = cache.weights[(lo + s) * heads + m];
                mix += w * da;
                dalpha.push(da);
                let dgj = &mut dg[j * d + hs.start..j * d + hs.end];
                for (x, &o) in dgj.iter_mut().zip(di) {
                    *x += w * o;
                }
            }
            let a_base = m * 2 * width;
            for (s, &j) in members.iter().enumerate() {
                let w = cache.weights[(lo + s) * heads + m];
                let raw = cache.logits[(lo + s) * heads + m];
                let de = w * (dalpha[s] - mix);
                let ds = if raw > T::zero() { de } else { de * slope };
                if ds == T::zero() {
                    continue;
                }
                for c in 0..width {
                    let gi_c = g[i * d + hs.start + c];
                    let gj_c = g[j * d + hs.start + c];
                    datt[a_base + c] += ds * gi_c;
                    datt[a_base + width + c] += ds * gj_c;
                    dg[i * d + hs.start + c] += ds * att[a_base + c];
                    dg[j * d + hs.start + c] += ds * att[a_base + width + c];
                }
            }
        }
    }
}
