//! Numerical toolkit for holomorphic dynamics on the Riemann sphere.
//!
//! The crate builds the computable objects attached to rigidity questions for
//! rational maps: Poincaré–Koenigs linearizers at repelling points, samples of
//! the measure of maximal entropy and of harmonic measure, multiplier and degree
//! relations together with fitted invariant curves, Lyapunov spectra of expanding
//! Blaschke products, and expansion diagnostics.

// `!(x < y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod correspondence;
pub mod error;
pub mod expansion;
pub mod evaluable;
pub mod linearization;
pub mod measures;
pub mod periodic;
pub mod poly;
pub mod rational;
pub mod render;
pub mod roots;
pub mod sphere;
pub mod workflow;

pub use error::{Error, Result};
pub use poly::Poly;
pub use rational::RationalMap;
pub use sphere::{chordal, Chart, Cx, SpherePoint};
