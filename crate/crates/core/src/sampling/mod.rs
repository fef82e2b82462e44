//! Seed-reproducible samplers: fixed-time marginals of every composed
//! process, and fBm paths.
//!
//! Marginals are drawn through conditional structure rather than by composing
//! paths: given the inner value `s`, `B_H(|s|)` is `N(0, |s|^{2H})` and
//! `C(|s|)` is Cauchy with scale `|s|`.

mod marginal;
mod paths;
mod rng;

pub use marginal::{
    sample_blocks, sample_many, sample_marginal, sample_squared_clock_chain, sample_weighted_chain, Samples,
    BLOCK,
};
pub use paths::{
    fbm_covariance, fbm_path_cholesky, fbm_path_circulant, FbmCholesky, FbmCirculant, PathMethod, PathSample,
    MAX_CHOLESKY_POINTS, MAX_CIRCULANT_STEPS,
};
pub use rng::{RngState, Stream};
