//! Pointwise integrands, weights and the elementary inequalities they obey,
//! plus the coefficient algebra of the recast non-divergence operator.

mod bounds;
mod calibration;
mod cordes;
mod integrand;

pub use bounds::{
    convexity_bound_check, convexity_bound_check_with, monotonicity_gap, p_monotonicity_check,
    rescaling_identity_check, sandwich_check, uniqueness_lower_check, uniqueness_upper_check,
    IdentityCheck, MonotonicityGap, SandwichCheck, SlackCheck, IDENTITY_TOL, SLACK_TOL,
};
pub use calibration::{
    calibrate_convexity, calibrate_monotonicity, calibrate_sandwich_upper, default_p0,
    monotonicity_c0, monotonicity_c1, sandwich_a0, sandwich_c3, convexity_c4,
    MonotonicityInfima, CALIBRATED_DIMS, PINNED_GROWTH_GRID, PINNED_MONOTONICITY_GRID,
};
pub use cordes::{
    contraction_factor, cordes_admissible, cordes_coefficients, cordes_epsilon_max,
    cordes_lhs_rhs, cordes_report, CordesCoefficients, CordesReport,
};
pub use integrand::{half_weight, integrand, integrand_sq, pow_change, v_map, weight};

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Exponents and regularisation parameters of the double-phase energy.
///
/// `n` is the domain dimension, `target_dim` the ambient dimension of the
/// target. The energy density is
/// `(1/p)[(s + (delta + |G|^2)^{n/2})^{p/n} - (s + delta^{n/2})^{p/n}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub n: usize,
    pub target_dim: usize,
    pub p: f64,
    pub delta: f64,
    pub s: f64,
}

impl GrowthParams {
    pub fn new(n: usize, target_dim: usize, p: f64, delta: f64, s: f64) -> Result<Self> {
        let params = GrowthParams { n, target_dim, p, delta, s };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n", "domain dimension must be at least 2"));
        }
        if self.target_dim < 1 {
            return Err(invalid("target_dim", "target dimension must be at least 1"));
        }
        if !(self.p.is_finite() && self.p >= self.n as f64) {
            return Err(invalid("p", "must be finite and at least n"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid("delta", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(invalid("s", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Same dimensions and `s`, new exponent and regularisation.
    pub fn with_p_delta(&self, p: f64, delta: f64) -> Result<Self> {
        GrowthParams::new(self.n, self.target_dim, p, delta, self.s)
    }

    /// Parameters seen by `v(x) = u(c + r x)`: `delta r^2` and `s r^n`.
    ///
    /// Not range-checked, so `r > 1` may leave `[0, 1]`.
    pub fn rescaled(&self, r: f64) -> Self {
        GrowthParams {
            delta: self.delta * r * r,
            s: self.s * crate::math::gpow(r, self.n as f64),
            ..*self
        }
    }

    #[inline]
    pub fn nf(&self) -> f64 {
        self.n as f64
    }
}
