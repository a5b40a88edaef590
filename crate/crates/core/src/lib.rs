//! Accelerated surface localization and mesh-free rendering for continuous
//! implicit occupancy fields.
//!
//! The crate is organised around a [`field::FieldOracle`], an analytic
//! occupancy/texture function that counts every occupancy evaluation. The
//! extraction strategies in [`localize`] and the view renderer in [`render`]
//! are measured by how many of those evaluations they need while matching
//! the dense brute-force result. [`mesh`] provides Marching Cubes and the
//! surface metrics, and [`sampling`] the training-side machinery (online hard
//! example mining, importance sampling, depth encoding).

pub mod cli;
pub mod error;
pub mod field;
pub mod grid;
pub mod localize;
pub mod mesh;
pub mod point;
pub mod render;
pub mod sampling;

pub use error::{Error, Result};
pub use point::Point3;
