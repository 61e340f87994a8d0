//! Conditional mode of the latent field.

use nalgebra::DVector;

use super::LatentModel;
use crate::error::{Error, Result};
use crate::linalg::BorderedCholesky;

#[derive(Debug, Clone, Copy)]
pub struct ModeOptions {
    /// Convergence when the gradient max-norm drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

/// `chi*(phi)` with the factorized negative Hessian there.
#[derive(Debug, Clone)]
pub struct LatentMode {
    pub chi: DVector<f64>,
    /// `log pi(chi* | phi) + log pi(D | chi*, phi)`.
    pub value: f64,
    pub chol: BorderedCholesky,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Damped Newton ascent on the conditional log-density. When the negative
/// Hessian does not factor a multiple of the identity is added until it does.
pub fn latent_mode(
    model: &impl LatentModel,
    phi: &[f64],
    start: Option<&DVector<f64>>,
    opts: &ModeOptions,
) -> Result<LatentMode> {
    let mut chi = start.cloned().unwrap_or_else(|| model.initial_latent());
    if chi.len() != model.latent_dim() {
        return Err(Error::DimensionMismatch {
            context: "latent start".into(),
            expected: model.latent_dim(),
            got: chi.len(),
        });
    }
    let mut best = (f64::NEG_INFINITY, chi.clone());
    let mut grad_norm = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let der = model.conditional_derivatives(&chi, phi)?;
        if !der.value.is_finite() {
            return Err(Error::NonFinite {
                term: "latent log-density".into(),
            });
        }
        if der.value > best.0 {
            best = (der.value, chi.clone());
        }
        grad_norm = der.grad.amax();
        let chol = der.neg_hess.cholesky();
        if grad_norm < opts.tol {
            let chol = chol.map_err(|_| {
                Error::NotPositiveDefinite("negative Hessian of the latent field at its mode".into())
            })?;
            return Ok(LatentMode {
                chi,
                value: der.value,
                chol,
                iterations: it,
                grad_norm,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let step = match chol {
            Ok(c) => c.solve(&der.grad),
            Err(_) => {
                let mut h = der.neg_hess.clone();
                let mut shift = 1e-6 * der.neg_hess.max_abs_diagonal().max(1.0);
                loop {
                    h.add_diagonal(shift);
                    if let Ok(c) = h.cholesky() {
                        break c.solve(&der.grad);
                    }
                    if shift > 1e12 {
                        return Err(Error::NotPositiveDefinite("regularized latent Hessian".into()));
                    }
                    shift *= 10.0;
                }
            }
        };
        let floor = der.value - 1e-12 * der.value.abs().max(1.0);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let cand = &chi + &step * t;
            if let Ok(v) = model.log_conditional(&cand, phi) {
                if v.is_finite() && v >= floor {
                    chi = cand;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Err(Error::LatentNonconvergence {
        iterations: opts.max_iter,
        grad_norm,
        best: best.1.as_slice().to_vec(),
    })
}
