//! Structural gradient models (SGM) on the unit hypercube.
//!
//! A density on `[0,1]^m` is written as `p(x) = det D²ψ(x|θ)` where the
//! potential `ψ` is a quadratic plus a finite cosine series. This crate
//! evaluates those densities, checks the parameter regions that keep them
//! valid, fits them by determinant maximization, samples from them exactly,
//! and computes their moments by tensor quadrature.

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod feasibility;
pub mod linalg;
pub mod maxdet;
pub mod model;
pub mod par;
pub mod sampling;

pub use error::{Error, Result};
pub use model::{Density, FrequencySet, Mixm, ParamVector, Sgm};
