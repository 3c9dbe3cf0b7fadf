//! Helfrich and locally constrained Willmore functionals on triangle meshes
//! and on exact parametric surfaces.
//!
//! The crate evaluates area, signed volume, Willmore and Helfrich energies,
//! the Euler-Lagrange operator `ΔH + H|A°|² + 2c0K - (2l1 + c0²/2)H - 2l2`,
//! energy gradients, descent flows, and the sphere/plane classification of
//! critical points by the signs of the area and volume weights.
//!
//! Sign conventions: `H = k1 + k2` is measured against the inward unit
//! normal, so a round sphere of radius `r` has `H = 2/r > 0`.

pub mod analytic;
pub mod classify;
pub mod curvature;
pub mod energy;
pub mod error;
pub mod exec;
pub mod flow;
pub mod mesh;
pub mod variation;

pub use error::{Error, Result};
pub use exec::Execution;

pub type Vec3 = nalgebra::Vector3<f64>;
