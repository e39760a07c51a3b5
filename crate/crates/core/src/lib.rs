//! Galerkin boundary element methods for two-dimensional sound-soft
//! scattering at high frequency.
//!
//! The unknown is the surface current `η = ∂ν(u + u_inc)` on a smooth closed
//! boundary. It is sought in spaces of polynomials (or trigonometric
//! polynomials) weighted by the incident phase `exp(ik α·γ)`, with a
//! frequency dependent change of variables resolving the `O(k^{-1/3})`
//! boundary layers around the shadow boundaries.
//!
//! All numerical code is generic over [`Real`]; the aliases at the crate
//! root fix the scalar to `f64`.

pub mod error;
pub mod galerkin;
pub mod geometry;
pub mod hfspaces;
pub mod linalg;
pub mod operators;
pub mod scalar;
pub mod specfun;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar::{Real, Vec2};

pub type BoundaryCurve = geometry::BoundaryCurve<f64>;
pub type ScatteringConfig = geometry::ScatteringConfig<f64>;
pub type Complex64 = num_complex::Complex<f64>;
