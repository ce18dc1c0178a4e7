use crate::error::{invalid, Error, Result};
use crate::math::{dot, floor, norm_sq, sqrt};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Tolerance for "base point lies on the target" and "vector is tangent".
pub const MANIFOLD_TOL: f64 = 1e-8;

/// Embedded target manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetManifold {
    /// Round sphere `S^dim` of the given radius in `R^{dim+1}`.
    Sphere { dim: usize, radius: f64 },
    /// Flat torus `R^k / (periods)`, represented in the box `[0, P_i)`.
    FlatTorus { periods: Vec<f64> },
}

impl TargetManifold {
    /// Unit sphere `S^dim`.
    pub fn sphere(dim: usize) -> Self {
        TargetManifold::Sphere { dim, radius: 1.0 }
    }

    pub fn flat_torus(periods: Vec<f64>) -> Result<Self> {
        if periods.is_empty() || periods.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(invalid("periods", "need at least one positive finite period"));
        }
        Ok(TargetManifold::FlatTorus { periods })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetManifold::Sphere { dim, radius } => {
                if !(1..=7).contains(dim) {
                    return Err(invalid("dim", "sphere dimension must lie in 1..=7"));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("radius", "must be positive and finite"));
                }
                Ok(())
            }
            TargetManifold::FlatTorus { periods } => Self::flat_torus(periods.clone()).map(|_| ()),
        }
    }

    /// `N`, the dimension of the ambient space.
    pub fn ambient_dim(&self) -> usize {
        match self {
            TargetManifold::Sphere { dim, .. } => dim + 1,
            TargetManifold::FlatTorus { periods } => periods.len(),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            TargetManifold::Sphere { dim, .. } => *dim,
            TargetManifold::FlatTorus { periods } => periods.len(),
        }
    }

    /// Distance of `x` from the target's representation set.
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        match self {
            TargetManifold::Sphere { radius, .. } => (sqrt(norm_sq(x)) - radius).abs(),
            TargetManifold::FlatTorus { periods } => x
                .iter()
                .zip(periods)
                .map(|(v, p)| if *v < 0.0 { -v } else if *v >= *p { v - p } else { 0.0 })
                .fold(0.0, f64::max),
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::Shape(alloc::format!(
                "expected an ambient vector of length {}, got {}",
                self.ambient_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Nearest-point retraction (modular reduction on the torus).
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut y = x.to_vec();
        self.project_in_place(&mut y)?;
        Ok(y)
    }

    pub fn project_in_place(&self, x: &mut [f64]) -> Result<()> {
        match self {
            TargetManifold::Sphere { radius, .. } => {
                let l = sqrt(norm_sq(x));
                if l == 0.0 || !l.is_finite() {
                    return Err(Error::ZeroVector);
                }
                // Points already on the sphere to rounding are returned as is,
                // which makes the retraction exactly idempotent.
                if (l - radius).abs() <= 8.0 * f64::EPSILON * radius {
                    return Ok(());
                }
                let f = radius / l;
                x.iter_mut().for_each(|v| *v *= f);
                Ok(())
            }
            TargetManifold::FlatTorus { periods } => {
                for (v, p) in x.iter_mut().zip(periods) {
                    if !v.is_finite() {
                        return Err(invalid("x", "non-finite coordinate"));
                    }
                    let mut r = *v - p * floor(*v / p);
                    if r >= *p || r < 0.0 {
                        r = 0.0;
                    }
                    *v = r;
                }
                Ok(())
            }
        }
    }

    fn check_on(&self, base: &[f64]) -> Result<()> {
        self.check_len(base)?;
        let d = self.distance_to(base);
        if d > MANIFOLD_TOL {
            return Err(Error::OffManifold { distance: d });
        }
        Ok(())
    }

    /// Orthogonal projection of `v` onto the tangent space at `base`.
    pub fn tangent_project(&self, base: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_on(base)?;
        self.check_len(v)?;
        let mut out = v.to_vec();
        self.tangent_project_in_place(base, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`TargetManifold::tangent_project`].
    #[inline]
    pub fn tangent_project_in_place(&self, base: &[f64], v: &mut [f64]) {
        if let TargetManifold::Sphere { .. } = self {
            let c = dot(base, v) / norm_sq(base);
            v.iter_mut().zip(base).for_each(|(x, b)| *x -= c * b);
        }
    }

    /// Normal component of `v` at `base`, relative to `|v|`.
    fn normal_part(&self, base: &[f64], v: &[f64]) -> f64 {
        match self {
            TargetManifold::Sphere { radius, .. } => dot(base, v).abs() / radius,
            TargetManifold::FlatTorus { .. } => 0.0,
        }
    }

    /// Second fundamental form `A_base(X, Y)`; `-<X,Y> u / R^2` on spheres.
    pub fn second_fundamental_form(&self, base: &[f64], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_on(base)?;
        self.check_len(x)?;
        self.check_len(y)?;
        for v in [x, y] {
            let normal = self.normal_part(base, v);
            if normal > MANIFOLD_TOL * sqrt(norm_sq(v)).max(1.0) {
                return Err(Error::NotTangent { normal });
            }
        }
        Ok(match self {
            TargetManifold::Sphere { radius, .. } => {
                let c = -dot(x, y) / (radius * radius);
                base.iter().map(|b| c * b).collect()
            }
            TargetManifold::FlatTorus { periods } => alloc::vec![0.0; periods.len()],
        })
    }

    /// Writes `b - a` into `out`, taking the shortest representative on tori.
    #[inline]
    pub fn difference(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        match self {
            TargetManifold::Sphere { .. } => {
                for k in 0..out.len() {
                    out[k] = b[k] - a[k];
                }
            }
            TargetManifold::FlatTorus { periods } => {
                for k in 0..out.len() {
                    let d = b[k] - a[k];
                    out[k] = d - periods[k] * floor(d / periods[k] + 0.5);
                }
            }
        }
    }

    /// Radius for spheres, `None` for flat tori.
    pub fn sphere_radius(&self) -> Option<f64> {
        match self {
            TargetManifold::Sphere { radius, .. } => Some(*radius),
            TargetManifold::FlatTorus { .. } => None,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, TargetManifold::Sphere { .. })
    }
}
