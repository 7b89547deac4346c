//! Elementwise nonlinearities and row softmax.

use crate::scalar::Real;

#[inline]
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Standard normal CDF via `erf`.
#[inline]
pub fn normal_cdf<T: Real>(x: T) -> T {
    let v = x.as_f64();
    T::lit(0.5 * (1.0 + libm::erf(v / std::f64::consts::SQRT_2)))
}

#[inline]
pub fn normal_pdf<T: Real>(x: T) -> T {
    let v = x.as_f64();
    T::lit((-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

/// Exact GELU, `x * Phi(x)`.
#[inline]
pub fn gelu_scalar<T: Real>(x: T) -> T {
    x * normal_cdf(x)
}

#[inline]
pub fn gelu_grad<T: Real>(x: T) -> T {
    normal_cdf(x) + x * normal_pdf(x)
}

#[inline]
pub fn leaky_scalar<T: Real>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        slope * x
    }
}

/// Softmax over each contiguous row of width `w`.
pub fn softmax_rows<T: Real>(x: &[T], w: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(w) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        let mut total = T::zero();
        for &v in row {
            let e = (v - m).exp();
            total += e;
            out.push(e);
        }
        for v in &mut out[start..] {
            *v /= total;
        }
    }
    out
}
