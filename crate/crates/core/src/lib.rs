//! Discrete double-phase approximations of the conformally invariant
//! n-energy for maps into spheres and flat tori.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature only adds
//! thread-parallel cell assembly; results are bit-identical either way.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bubbling;
pub mod energy;
pub mod error;
pub mod kernel;
pub mod manifolds;
pub mod solver;

mod math;
mod par;

pub use error::{Error, Result};
pub use kernel::GrowthParams;
pub use manifolds::{DomainMesh, MapField, MeshKind, TargetManifold};
