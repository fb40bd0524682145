//! Strongly convergent Halpern-type iterations on finite-dimensional `l^p`
//! spaces.
//!
//! The crate provides the duality mapping `J` of `l^p_n`, the functional
//! `phi(x, y) = |x|^2 - 2<x, Jy> + |y|^2`, generalized projections onto
//! closed convex sets, resolvents `(J + rA)^{-1} J` of monotone operators, and
//! drivers for the iteration
//!
//! ```text
//! x_{n+1} = Q_C J^{-1}(alpha_n J u + (1 - alpha_n) J S_n x_n)
//! ```
//!
//! with every per-step inequality of the convergence argument recorded in
//! the trace.

// `!(a > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod mappings;
pub mod operators;
pub mod schedule;
pub mod sequences;
pub mod sets;
pub mod tolerances;

pub use error::{Error, Result};
pub use geometry::{DualVector, LpSpace, PrimalVector};
