//! Matrix containers, the factored low-rank representation, and the
//! spectral routines the solvers are built on.

mod dense;
mod factor;
mod operator;
mod power;
mod sparse;
mod svd;

pub use dense::{axpy, dot, frobenius_norm, norm2, DenseMatrix};
pub use factor::{project_observed, FactorPair};
pub use operator::{FnOperator, LinearOperator};
pub use power::{
    mix_seed, spectral_norm_estimate, top_singular_triplet, PowerConfig, PowerOutcome,
    SingularTriplet, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
pub use sparse::SparseObservations;
pub use svd::{factored_svd, span_basis, svd, svd_threshold, svd_warm, Svd, SPAN_TOL};
