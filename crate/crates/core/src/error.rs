use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("cannot project the zero vector onto a sphere")]
    ZeroVector,
    #[error("point is off the target manifold (distance {distance:e})")]
    OffManifold { distance: f64 },
    #[error("vector is not tangent at the base point (normal component {normal:e})")]
    NotTangent { normal: f64 },
    #[error("coefficients undefined for a vanishing gradient with delta = 0")]
    DegenerateCoefficients,
    #[error("degree is not resolved: raw value {raw} is {residual} away from an integer")]
    DegreeUnresolved { raw: f64, residual: f64 },
    #[error("degree needs an n-sphere target over an n-dimensional domain")]
    DegreeUnsupported,
    #[error("field does not match the mesh or target: {0}")]
    Shape(String),
    #[error("shell of radius {radius} crosses only {cells} cells")]
    UnderResolvedShell { radius: f64, cells: usize },
    #[error("rescaled ball of radius {radius} leaves the chart")]
    ChartOverflow { radius: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: &str) -> Error {
    Error::InvalidParameter {
        name,
        reason: String::from(reason),
    }
}
