use crate::error::{invalid, Error, Result};
use crate::math::{norm_sq, sqrt};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Coefficients `A^{ab}_{ij} = delta_ij delta^ab + (p-2) G_{ia} G_{jb} / (delta + |G|^2)`
/// stored as an `(nN) x (nN)` matrix with row index `a * N + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CordesCoefficients {
    pub n: usize,
    pub target_dim: usize,
    pub data: Vec<f64>,
}

impl CordesCoefficients {
    #[inline]
    pub fn size(&self) -> usize {
        self.n * self.target_dim
    }

    /// `A^{ab}_{ij}` for domain indices `a, b` and target indices `i, j`.
    #[inline]
    pub fn get(&self, a: usize, b: usize, i: usize, j: usize) -> f64 {
        let m = self.size();
        self.data[(a * self.target_dim + i) * m + b * self.target_dim + j]
    }

    pub fn trace(&self) -> f64 {
        let m = self.size();
        (0..m).map(|k| self.data[k * m + k]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CordesReport {
    pub lhs: f64,
    pub rhs: f64,
    pub epsilon_max: f64,
    pub admissible: bool,
}

/// `g` is the `n x N` Jacobian, row-major with rows indexed by the domain.
pub fn cordes_coefficients(
    g: &[f64],
    n: usize,
    target_dim: usize,
    p: f64,
    delta: f64,
) -> Result<CordesCoefficients> {
    let m = n * target_dim;
    if g.len() != m {
        return Err(invalid("g", "Jacobian must have n * N entries"));
    }
    let t = norm_sq(g);
    let denom = delta + t;
    if denom <= 0.0 {
        return Err(Error::DegenerateCoefficients);
    }
    let factor = (p - 2.0) / denom;
    let mut data = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            let id = if r == c { 1.0 } else { 0.0 };
            data[r * m + c] = id + factor * g[r] * g[c];
        }
    }
    Ok(CordesCoefficients { n, target_dim, data })
}

/// `(sum A^2, (trace A)^2 / (nN - 1 + eps))`.
pub fn cordes_lhs_rhs(coeffs: &CordesCoefficients, epsilon: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid("epsilon", "must lie in (0, 1]"));
    }
    Ok(lhs_rhs_unchecked(coeffs, epsilon))
}

fn lhs_rhs_unchecked(coeffs: &CordesCoefficients, epsilon: f64) -> (f64, f64) {
    let lhs = norm_sq(&coeffs.data);
    let tr = coeffs.trace();
    (lhs, tr * tr / (coeffs.size() as f64 - 1.0 + epsilon))
}

/// Largest `eps` in `[0, 1]` for which the condition holds for every gradient.
///
/// With `a = p - 2` and `m = nN` the condition reads, for `t in [0, 1]`,
/// `eps <= (m + 2at - (m-2)a^2 t^2) / ((m-1) + (1+at)^2)`; the right side
/// is smallest at `t = 1`.
pub fn cordes_epsilon_max(p: f64, nn: usize) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", "must be finite and at least 1"));
    }
    if nn == 0 {
        return Err(invalid("nN", "must be at least 1"));
    }
    if nn == 1 {
        return Ok(1.0);
    }
    let m1 = nn as f64 - 1.0;
    let a = p - 2.0;
    let eps = 1.0 - m1 * a * a / (m1 + (p - 1.0) * (p - 1.0));
    Ok(eps.clamp(0.0, 1.0))
}

/// `nN <= 2` or `p < 3 + 2/(nN - 2)`.
pub fn cordes_admissible(n: usize, target_dim: usize, p: f64) -> bool {
    let nn = n * target_dim;
    nn <= 2 || p < 3.0 + 2.0 / (nn as f64 - 2.0)
}

/// `sqrt(1 - eps)`.
pub fn contraction_factor(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid("epsilon", "must lie in (0, 1]"));
    }
    Ok(sqrt(1.0 - epsilon))
}

/// Coefficients at `g` evaluated at `epsilon_max(p, nN)`.
pub fn cordes_report(g: &[f64], n: usize, target_dim: usize, p: f64, delta: f64) -> Result<CordesReport> {
    let coeffs = cordes_coefficients(g, n, target_dim, p, delta)?;
    let epsilon_max = cordes_epsilon_max(p, n * target_dim)?;
    let (lhs, rhs) = lhs_rhs_unchecked(&coeffs, epsilon_max);
    Ok(CordesReport {
        lhs,
        rhs,
        epsilon_max,
        admissible: cordes_admissible(n, target_dim, p),
    })
}
