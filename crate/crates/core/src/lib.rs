//! Rank-adaptive low-rank time integration of matrix differential equations.
//!
//! The state `V(t) ∈ ℝ^{n×s}` of `dV/dt = F(V, t)` is kept as a truncated SVD
//! `U Σ Yᵀ`. Each step of [`integrators::TdbCur`] evaluates `F` only at a few
//! sampled rows and columns, picked by [`sampling`], and rebuilds the
//! factorization from a CUR-type cross approximation.

// negated comparisons are the NaN-rejecting form
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod error;
pub mod integrators;
pub mod lowrank;
pub mod models;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
