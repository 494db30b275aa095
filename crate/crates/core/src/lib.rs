//! Invariants of the harmonic conformal class of asymptotically flat
//! exteriors: capacity, ADM mass, the mass profile and the area profile.

// `!(x > 0.0)` style checks are used deliberately to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod harmonic;
pub mod invariants;
pub mod masschecks;
pub mod minarea;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod spline;

pub use error::{Error, Result};
pub use geometry::{constants, BaseGeometry, Constants, Dimension, GeometryKind, GeometrySpec};
