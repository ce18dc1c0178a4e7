use super::calibration::{convexity_c4, default_p0, sandwich_a0, sandwich_c3};
use super::integrand::{half_weight, integrand_sq, norm, weight};
use super::GrowthParams;
use crate::error::{invalid, Result};
use crate::math::{gpow, norm_sq};
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

/// Outcome of a one-sided inequality check. `slack` is the larger side minus
/// the smaller one; `scale` is the magnitude used for the rounding allowance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackCheck {
    pub holds: bool,
    pub slack: f64,
    pub scale: f64,
}

/// Relative rounding allowance for the sampled inequalities.
pub const SLACK_TOL: f64 = 1e-12;

impl SlackCheck {
    fn new(slack: f64, scale: f64) -> Self {
        SlackCheck {
            holds: slack >= -SLACK_TOL * scale,
            slack,
            scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityGap {
    /// `[w(|X|^2) X - w(|Y|^2) Y] . (X - Y)`
    pub pairing: f64,
    /// `|V(X) - V(Y)|^2`
    pub v_gap: f64,
    /// `|X - Y|^p`
    pub p_gap: f64,
}

impl MonotonicityGap {
    /// `pairing >= c0 v_gap >= c1 p_gap` up to relative rounding.
    pub fn chain_holds(&self, c0: f64, c1: f64) -> bool {
        let first = self.pairing - c0 * self.v_gap >= -SLACK_TOL * self.pairing.abs().max(self.v_gap);
        let second = c0 * self.v_gap - c1 * self.p_gap >= -SLACK_TOL * (c0 * self.v_gap).max(self.p_gap);
        first && second
    }
}

fn check_lengths(x: &[f64], y: &[f64]) {
    assert_eq!(x.len(), y.len(), "vectors must have equal length");
}

pub fn monotonicity_gap(x: &[f64], y: &[f64], params: &GrowthParams) -> MonotonicityGap {
    check_lengths(x, y);
    let (tx, ty) = (norm_sq(x), norm_sq(y));
    let (wx, wy) = (weight(tx, params), weight(ty, params));
    let (hx, hy) = (half_weight(tx, params), half_weight(ty, params));
    let mut pairing = 0.0;
    let mut v_gap = 0.0;
    let mut d2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        pairing += (wx * a - wy * b) * d;
        let dv = hx * a - hy * b;
        v_gap += dv * dv;
        d2 += d * d;
    }
    MonotonicityGap {
        pairing,
        v_gap,
        p_gap: gpow(d2, 0.5 * params.p),
    }
}

/// `pairing >= (w(|X|^2) + w(|Y|^2))/2 |X - Y|^2`.
pub fn uniqueness_lower_check(x: &[f64], y: &[f64], params: &GrowthParams) -> SlackCheck {
    let gap = monotonicity_gap(x, y, params);
    let (tx, ty) = (norm_sq(x), norm_sq(y));
    let (wx, wy) = (weight(tx, params), weight(ty, params));
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let rhs = 0.5 * (wx + wy) * d2;
    let scale = (wx * norm(x) + wy * norm(y)) * d2.sqrt();
    SlackCheck::new(gap.pairing - rhs, scale)
}

/// `|V(X) - V(Y)| <= (p/2)(w(|X|^2)^{1/2} + w(|Y|^2)^{1/2}) |X - Y|`.
pub fn uniqueness_upper_check(x: &[f64], y: &[f64], params: &GrowthParams) -> SlackCheck {
    let gap = monotonicity_gap(x, y, params);
    let (tx, ty) = (norm_sq(x), norm_sq(y));
    let (hx, hy) = (half_weight(tx, params), half_weight(ty, params));
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let lhs = gap.v_gap.sqrt();
    let rhs = 0.5 * params.p * (hx + hy) * d;
    let scale = hx * norm(x) + hy * norm(y);
    SlackCheck::new(rhs - lhs, scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    /// `p * integrand - max(|x|^n - a0, |x|^p)`
    pub lower: SlackCheck,
    /// `C3 (1 + |x|^p) - p * integrand`
    pub upper: SlackCheck,
}

impl SandwichCheck {
    pub fn holds(&self) -> bool {
        self.lower.holds && self.upper.holds
    }
}

/// Two-sided growth bound of the un-normalised density `p * integrand`.
pub fn sandwich_check(g: &[f64], params: &GrowthParams) -> SandwichCheck {
    let t = norm_sq(g);
    let mid = params.p * integrand_sq(t, params);
    let xp = gpow(t, 0.5 * params.p);
    let xn = gpow(t, 0.5 * params.nf());
    let low = (xn - sandwich_a0(params.n)).max(xp);
    let high = sandwich_c3(params.n) * (1.0 + xp);
    SandwichCheck {
        lower: SlackCheck::new(mid - low, mid.max(low)),
        upper: SlackCheck::new(high - mid, high.max(mid)),
    }
}

/// Convexity bound at `s = 1` with the default `P0` and calibrated `C4`.
pub fn convexity_bound_check(x: &[f64], params: &GrowthParams) -> Result<SlackCheck> {
    convexity_bound_check_with(x, params, default_p0(params.n), convexity_c4(params.n))
}

/// `(1/p)[(1+(d+|x|^2)^{n/2})^{p/n} - (1+d^{n/2})^{p/n}]
///   <= |x|^n/n + c4 max(|x|^p, 1)(p0 - n + d)`.
pub fn convexity_bound_check_with(
    x: &[f64],
    params: &GrowthParams,
    p0: f64,
    c4: f64,
) -> Result<SlackCheck> {
    if params.s != 1.0 {
        return Err(invalid("s", "the convexity bound is stated for s = 1"));
    }
    let t = norm_sq(x);
    let n = params.nf();
    let lhs = integrand_sq(t, params);
    let rhs = gpow(t, 0.5 * n) / n + c4 * gpow(t, 0.5 * params.p).max(1.0) * (p0 - n + params.delta);
    Ok(SlackCheck::new(rhs - lhs, lhs.max(rhs)))
}

/// Density at `p1` is bounded by the density at `p2 > p1` when `s = 1`.
pub fn p_monotonicity_check(g: &[f64], n: usize, p1: f64, p2: f64, delta: f64) -> Result<SlackCheck> {
    if !(n as f64 <= p1 && p1 < p2) {
        return Err(invalid("p1", "need n <= p1 < p2"));
    }
    let lo = GrowthParams::new(n, 1, p1, delta, 1.0)?;
    let hi = GrowthParams::new(n, 1, p2, delta, 1.0)?;
    let t = norm_sq(g);
    let (a, b) = (integrand_sq(t, &lo), integrand_sq(t, &hi));
    Ok(SlackCheck::new(b - a, a.max(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    pub holds: bool,
}

/// Relative tolerance for the closed-form identities.
pub const IDENTITY_TOL: f64 = 1e-12;

/// `integrand_{p, r^2 delta, r^n s}(r G) = r^p integrand_{p, delta, s}(G)`.
pub fn rescaling_identity_check(g: &[f64], r: f64, params: &GrowthParams) -> Result<IdentityCheck> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", "scale must be positive and finite"));
    }
    let t = norm_sq(g);
    let lhs = integrand_sq(r * r * t, &params.rescaled(r));
    let rhs = gpow(r, params.p) * integrand_sq(t, params);
    let denom = lhs.abs().max(rhs.abs());
    let rel_err = if denom == 0.0 { 0.0 } else { (lhs - rhs).abs() / denom };
    Ok(IdentityCheck {
        lhs,
        rhs,
        rel_err,
        holds: rel_err <= IDENTITY_TOL,
    })
}
