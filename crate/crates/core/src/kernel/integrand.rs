use super::GrowthParams;
use crate::math::{gpow, norm_sq, sqrt};
use alloc::vec::Vec;
use num_traits::Float;

/// `(d + x)^e - d^e` without cancellation for `d, x >= 0`.
#[inline]
pub(crate) fn pow_increment(d: f64, x: f64, e: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if e == 1.0 {
        return x;
    }
    if d <= 0.0 {
        return gpow(x, e);
    }
    gpow(d, e) * Float::exp_m1(e * Float::ln_1p(x / d))
}

/// `(d + x)^e - d^e` for `d >= 0`, `d + x >= 0`, either sign of `x`.
#[inline]
pub fn pow_change(d: f64, x: f64, e: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if e == 1.0 {
        return x;
    }
    if d <= 0.0 {
        return gpow(x.max(0.0), e);
    }
    let r = x / d;
    if r <= -1.0 {
        return -gpow(d, e);
    }
    gpow(d, e) * Float::exp_m1(e * Float::ln_1p(r))
}

/// Energy density as a function of `t = |G|^2`.
#[inline]
pub fn integrand_sq(t: f64, params: &GrowthParams) -> f64 {
    let n = params.nf();
    let inner = pow_increment(params.delta, t, 0.5 * n);
    let base = params.s + gpow(params.delta, 0.5 * n);
    pow_increment(base, inner, params.p / n) / params.p
}

/// Energy density at the Jacobian `g` (Frobenius norm).
pub fn integrand(g: &[f64], params: &GrowthParams) -> f64 {
    integrand_sq(norm_sq(g), params)
}

/// `w(t) = (s + (delta+t)^{n/2})^{(p-n)/n} (delta+t)^{(n-2)/2}`, twice the
/// derivative of the density in `t`.
#[inline]
pub fn weight(t: f64, params: &GrowthParams) -> f64 {
    let n = params.nf();
    let a = params.delta + t;
    gpow(params.s + gpow(a, 0.5 * n), (params.p - n) / n) * gpow(a, 0.5 * (n - 2.0))
}

/// Square root of [`weight`], evaluated with halved exponents.
#[inline]
pub fn half_weight(t: f64, params: &GrowthParams) -> f64 {
    let n = params.nf();
    let a = params.delta + t;
    gpow(params.s + gpow(a, 0.5 * n), 0.5 * (params.p - n) / n) * gpow(a, 0.25 * (n - 2.0))
}

/// `V(X) = half_weight(|X|^2) X`.
pub fn v_map(x: &[f64], params: &GrowthParams) -> Vec<f64> {
    let h = half_weight(norm_sq(x), params);
    x.iter().map(|v| h * v).collect()
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    sqrt(norm_sq(x))
}
