//! Nested Laplace inference for latent Gaussian models.
//!
//! Unknowns split into a latent field `chi`, Gaussian given the
//! hyperparameters `phi`, and a low-dimensional `phi`. The engine
//!
//! 1. finds the conditional mode `chi*(phi)` by Newton iterations and
//!    approximates `log pi(phi | D)` with a Laplace approximation,
//! 2. locates the mode of that approximation and lays an integration grid
//!    over it in the standardized eigenbasis of its curvature,
//! 3. mixes the Gaussian approximations `pi(chi | phi_h, D)` over the grid.
//!
//! Any model whose negative Hessian in `chi` has bordered block-diagonal
//! structure can be plugged in through [`LatentModel`].

mod explore;
mod joint;
mod marginals;
mod mode;
pub mod toy;

use nalgebra::DVector;

use crate::error::Result;
use crate::linalg::{BorderedCholesky, BorderedMatrix};

pub use explore::{explore_hyper, log_marginal_hyper, ExploreOptions, GridPoint, GridStrategy, IntegrationGrid};
pub use joint::{
    fit, AlphaSupport, CureSummary, FitOptions, GroupCure, JointFit, JointLatentModel, PosteriorSummary,
    PriorSpec,
};
pub use marginals::{
    latent_marginal, latent_marginals, posterior_sample, GaussianMixture, HyperMarginal, HyperTransform,
    ParameterSummary, PosteriorDraw,
};
pub use mode::{latent_mode, LatentMode, ModeOptions};

/// Value, gradient and negative Hessian of `log pi(chi | phi) + log pi(D | chi, phi)`.
#[derive(Debug, Clone)]
pub struct LatentDerivatives {
    pub value: f64,
    pub grad: DVector<f64>,
    pub neg_hess: BorderedMatrix,
}

/// A latent Gaussian model with `n_blocks` conditionally independent blocks
/// of size `block_dim` followed by `border_dim` shared coordinates.
pub trait LatentModel: Sync {
    fn n_blocks(&self) -> usize;
    fn block_dim(&self) -> usize;
    fn border_dim(&self) -> usize;
    fn hyper_dim(&self) -> usize;

    fn latent_dim(&self) -> usize {
        self.n_blocks() * self.block_dim() + self.border_dim()
    }

    /// `log pi(phi)` in the internal parameterization, Jacobian included;
    /// `-inf` outside the support.
    fn log_hyper_prior(&self, phi: &[f64]) -> f64;

    /// `log pi(chi | phi) + log pi(D | chi, phi)`.
    fn log_conditional(&self, chi: &DVector<f64>, phi: &[f64]) -> Result<f64>;

    fn conditional_derivatives(&self, chi: &DVector<f64>, phi: &[f64]) -> Result<LatentDerivatives>;

    fn initial_latent(&self) -> DVector<f64> {
        DVector::zeros(self.latent_dim())
    }

    fn initial_hyper(&self) -> Vec<f64> {
        vec![0.0; self.hyper_dim()]
    }

    /// Box holding the support of `log_hyper_prior`, per coordinate.
    fn hyper_bounds(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.hyper_dim()]
    }

    fn hyper_names(&self) -> Vec<String> {
        (0..self.hyper_dim()).map(|j| format!("phi_{j}")).collect()
    }

    /// Map from the internal to the reporting scale of hyperparameter `j`.
    fn hyper_transform(&self, _j: usize) -> HyperTransform {
        HyperTransform::Identity
    }

    /// Gradient in `chi` of `log det H`, `H` the negative Hessian factored in
    /// `chol`. `None` means it is identically zero.
    fn log_det_gradient(
        &self,
        _chi: &DVector<f64>,
        _phi: &[f64],
        _chol: &BorderedCholesky,
    ) -> Result<Option<DVector<f64>>> {
        Ok(None)
    }
}

/// Approximate conditional mean `chi* - H^{-1} grad(log det H) / 2`: the
/// first-order skewness shift of the Laplace approximation.
pub fn corrected_mean(model: &impl LatentModel, phi: &[f64], mode: &LatentMode) -> Result<DVector<f64>> {
    Ok(match model.log_det_gradient(&mode.chi, phi, &mode.chol)? {
        Some(g) => &mode.chi - mode.chol.solve(&g) * 0.5,
        None => mode.chi.clone(),
    })
}

/// Unnormalized `log pi(chi, phi | D)`.
pub fn log_joint(model: &impl LatentModel, chi: &DVector<f64>, phi: &[f64]) -> Result<f64> {
    let lp = model.log_hyper_prior(phi);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(lp + model.log_conditional(chi, phi)?)
}

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;
