//! Dense maps and 1-D (transposed) convolution kernels.
//!
//! Convolutions take `x` as `[batch, time, channels]`; kernels are
//! `[width, c_in, c_out]` for `conv1d` and `[width, c_out, c_in]` for the
//! transpose, so a transpose built from a convolution's kernels is its
//! adjoint.

use crate::scalar::Real;

/// `y[n, out] = x[n, in] . w[in, out] + b[out]`.
pub fn dense_forward<T: Real>(x: &[T], w: &[T], b: &[T], n: usize, d_in: usize, d_out: usize) -> Vec<T> {
    let mut y = Vec::with_capacity(n * d_out);
    for i in 0..n {
        y.extend_from_slice(b);
        let row = &mut y[i * d_out..(i + 1) * d_out];
        for (k, &xv) in x[i * d_in..(i + 1) * d_in].iter().enumerate() {
            if xv == T::zero() {
                continue;
            }
            for (yo, &wv) in row.iter_mut().zip(&w[k * d_out..(k + 1) * d_out]) {
                *yo += xv * wv;
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward<T: Real>(
    dy: &[T],
    x: &[T],
    w: &[T],
    n: usize,
    d_in: usize,
    d_out: usize,
    dx: &mut [T],
    dw: &mut [T],
    db: &mut [T],
) {
    for i in 0..n {
        let g = &dy[i * d_out..(i + 1) * d_out];
        for (o, &gv) in g.iter().enumerate() {
            db[o] += gv;
        }
        let xi = &x[i * d_in..(i + 1) * d_in];
        let dxi = &mut dx[i * d_in..(i + 1) * d_in];
        for k in 0..d_in {
            let wk = &w[k * d_out..(k + 1) * d_out];
            let dwk = &mut dw[k * d_out..(k + 1) * d_out];
            let xv = xi[k];
            let mut acc = T::zero();
            for o in 0..d_out {
                acc += g[o] * wk[o];
                dwk[o] += xv * g[o];
            }
            dxi[k] += acc;
        }
    }
}

/// Valid cross-correlation: `[B, W, ci] -> [B, W-k+1, co]`.
pub fn conv1d_forward<T: Real>(
    x: &[T],
    kern: &[T],
    bias: &[T],
    batch: usize,
    width: usize,
    ci: usize,
    k: usize,
    co: usize,
) -> Vec<T> {
    let wo = width + 1 - k;
    let mut y = Vec::with_capacity(batch * wo * co);
    for b in 0..batch {
        for t in 0..wo {
            let start = y.len();
            y.extend_from_slice(bias);
            let out = &mut y[start..start + co];
            for j in 0..k {
                let xrow = &x[(b * width + t + j) * ci..(b * width + t + j + 1) * ci];
                for (c, &xv) in xrow.iter().enumerate() {
                    let kr = &kern[(j * ci + c) * co..(j * ci + c + 1) * co];
                    for (yo, &kv) in out.iter_mut().zip(kr) {
                        *yo += xv * kv;
                    }
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<T: Real>(
    dy: &[T],
    x: &[T],
    kern: &[T],
    batch: usize,
    width: usize,
    ci: usize,
    k: usize,
    co: usize,
    dx: &mut [T],
    dk: &mut [T],
    db: &mut [T],
) {
    let wo = width + 1 - k;
    for b in 0..batch {
        for t in 0..wo {
            let g = &dy[(b * wo + t) * co..(b * wo + t + 1) * co];
            for (o, &gv) in g.iter().enumerate() {
                db[o] += gv;
            }
            for j in 0..k {
                let base = (b * width + t + j) * ci;
                for c in 0..ci {
                    let kr = &kern[(j * ci + c) * co..(j * ci + c + 1) * co];
                    let dkr = &mut dk[(j * ci + c) * co..(j * ci + c + 1) * co];
                    let xv = x[base + c];
                    let mut acc = T::zero();
                    for o in 0..co {
                        acc += g[o] * kr[o];
                        dkr[o] += xv * g[o];
                    }
                    dx[base + c] += acc;
                }
            }
        }
    }
}

/// Transposed convolution: `[B, W', ci] -> [B, W'+k-1, co]` with kernels
/// `[k, co, ci]`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_transpose_forward<T: Real>(
    x: &[T],
    kern: &[T],
    bias: &[T],
    batch: usize,
    width: usize,
    ci: usize,
    k: usize,
    co: usize,
) -> Vec<T> {
    let wo = width + k - 1;
    let mut y = Vec::with_capacity(batch * wo * co);
    for _ in 0..batch * wo {
        y.extend_from_slice(bias);
    }
    for b in 0..batch {
        for t in 0..width {
            let xrow = &x[(b * width + t) * ci..(b * width + t + 1) * ci];
            for j in 0..k {
                let out = &mut y[(b * wo + t + j) * co..(b * wo + t + j + 1) * co];
                for (c, yo) in out.iter_mut().enumerate() {
                    let kr = &kern[(j * co + c) * ci..(j * co + c + 1) * ci];
                    let mut acc = T::zero();
                    for (&xv, &kv) in xrow.iter().zip(kr) {
                        acc += xv * kv;
                    }
                    *yo += acc;
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub fn conv1d_transpose_backward<T: Real>(
    dy: &[T],
    x: &[T],
    kern: &[T],
    batch: usize,
    width: usize,
    ci: usize,
    k: usize,
    co: usize,
    dx: &mut [T],
    dk: &mut [T],
    db: &mut [T],
) {
    let wo = width + k - 1;
    for b in 0..batch {
        for t in 0..wo {
            for (c, &gv) in dy[(b * wo + t) * co..(b * wo + t + 1) * co].iter().enumerate() {
                db[c] += gv;
            }
        }
        for t in 0..width {
            let xrow = &x[(b * width + t) * ci..(b * width + t + 1) * ci];
            let dxrow = &mut dx[(b * width + t) * ci..(b * width + t + 1) * ci];
            for j in 0..k {
                let g = &dy[(b * wo + t + j) * co..(b * wo + t + j + 1) * co];
                for (c, &gv) in g.iter().enumerate() {
                    let kr = &kern[(j * co + c) * ci..(j * co + c + 1) * ci];
                    let dkr = &mut dk[(j * co + c) * ci..(j * co + c + 1) * ci];
                    for o in 0..ci {
                        dxrow[o] += gv * kr[o];
                        dkr[o] += gv * xrow[o];
                    }
                }
            }
        }
    }
}
