//! Numerical toolkit for harmonic analysis on the Heisenberg group `H^n`.
//!
//! The core is generic over the scalar type through [`Real`]; the aliases below fix the
//! working precision to `f64`.

pub mod acceptance;
pub mod bmo;
pub mod commutator;
pub mod dyadic;
pub mod error;
pub mod grid;
pub mod group;
pub mod heat;
pub mod quadrature;
pub mod report;
pub mod riesz;
pub mod scalar;
pub mod sector;

pub use error::{Error, Result};
pub use group::{FieldScheme, GroupMetricInfo, GroupPoint, Mode, Space, VectorFieldId};
pub use quadrature::QuadratureConfig;
pub use scalar::Real;

/// A point of `H^n` or `R^n` in double precision.
pub type Point = GroupPoint<f64>;
