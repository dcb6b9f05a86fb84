//! Greedy and local-search algorithms for minimizing a convex function of a
//! matrix under a rank constraint, `min R(A) s.t. rank(A) ≤ r`.
//!
//! The solvers work on factored iterates `A = U·Vᵀ` and repeat two moves:
//! insert the top singular pair of `∇R(A)` as a new rank-1 term, and
//! re-fit the factors. Local search additionally drops a rank-1 term per
//! step to hold the rank fixed.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod inner;
pub mod linalg;
pub mod metrics;
pub mod objectives;
pub mod par;
pub mod solvers;
pub mod sparse_equiv;

pub use error::{Error, Result};
