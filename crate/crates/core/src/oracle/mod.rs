//! Slow reference implementations used to validate the nested Laplace
//! engine: a blockwise random-walk Metropolis sampler, brute-force
//! tensor quadrature of a subject's marginal likelihood and a
//! derivative-free optimizer.

mod mcmc;
mod nelder_mead;
mod quad;

pub use mcmc::{mh_sample, split_rhat, Chain, ChainConfig, McmcOutput};
pub use nelder_mead::NelderMead;
pub use quad::brute_quadrature_marginal;
