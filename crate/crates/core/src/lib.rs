//! Sticky-reflecting Brownian motion with boundary diffusion on the half-space
//! `D = {x₁ ≥ 0}`.
//!
//! The crate provides the closed-form intrinsic cost and its geodesics
//! ([`geometry`]), the explicit transition kernel ([`kernel`]), exact-in-law
//! path sampling ([`simulator`]), large-deviation slope experiments ([`ldp`])
//! and discrete optimal transport with the intrinsic cost ([`transport`]).

pub mod error;
pub mod geometry;
pub mod kernel;
pub mod ldp;
pub mod quadrature;
pub mod scalar;
pub mod simulator;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::{Extended, Real};

pub type Params = geometry::ModelParams<f64>;
pub type Point = geometry::HalfSpacePoint<f64>;
pub type Geodesic = geometry::GeodesicDescription<f64>;
pub type PlPath = geometry::Path<f64>;
