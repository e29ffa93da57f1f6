//! Numerical toolkit for the parabolic Anderson model on hyperbolic space.
//!
//! `no_std` with `alloc`: hyperboloid geometry, stationary Gaussian fields,
//! hyperbolic Brownian motion, curvature-rescaled Dirichlet eigenproblems,
//! geodesic-ball decompositions with partitions of unity, Feynman–Kac moment
//! estimators and the Donsker–Varadhan variational problem.

#![no_std]
#![cfg_attr(test, allow(unused_imports))]
// `!(x > 0.0)` guards are written to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod decomp;
pub mod error;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod moments;
pub mod numerics;
pub mod rng;
pub mod spectral;
pub mod stochastic;
pub mod variational;

pub use error::{Error, Result};
