//! Float helpers that work with and without `std`.

use num_traits::Float;

/// `b^e` with the degenerate base guarded: `0^0 = 1`, `0^e = 0` for `e > 0`.
#[inline]
pub(crate) fn gpow(b: f64, e: f64) -> f64 {
    if b > 0.0 {
        if e == 0.0 {
            1.0
        } else if e == 1.0 {
            b
        } else if e == 0.5 {
            Float::sqrt(b)
        } else {
            Float::powf(b, e)
        }
    } else if e == 0.0 {
        1.0
    } else if e > 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    Float::sqrt(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    Float::ln(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    Float::exp(x)
}

#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    Float::atan2(y, x)
}

#[inline]
pub(crate) fn acos(x: f64) -> f64 {
    Float::acos(x.clamp(-1.0, 1.0))
}

#[inline]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    Float::sin_cos(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    Float::floor(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    Float::round(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    Float::ceil(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    Float::sin(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    Float::cos(x)
}

#[inline]
pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
