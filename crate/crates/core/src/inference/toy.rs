//! Conjugate Gaussian random-intercept model, on which every Laplace step
//! is exact. Used to check the engine against closed forms.
//!
//! `y_ij ~ N(b_i + mu, s^2)`, `b_i ~ N(0, exp(2 phi))`, `mu ~ N(0, 1/tau)`,
//! `phi ~ N(m0, s0^2)`.

use nalgebra::{DMatrix, DVector};

use super::{LatentDerivatives, LatentModel, LN_2PI};
use crate::error::Result;
use crate::linalg::BorderedMatrix;

#[derive(Debug, Clone)]
pub struct GaussianToy {
    pub groups: Vec<Vec<f64>>,
    pub noise_sd: f64,
    pub tau_mu: f64,
    pub prior_mean: f64,
    pub prior_sd: f64,
}

impl GaussianToy {
    pub fn example() -> Self {
        Self {
            groups: vec![
                vec![1.2, 0.7, 1.9],
                vec![-0.3, 0.4],
                vec![2.2, 2.8, 1.7, 2.0],
                vec![0.1],
                vec![0.9, 1.4],
            ],
            noise_sd: 0.8,
            tau_mu: 0.01,
            prior_mean: 0.0,
            prior_sd: 1.0,
        }
    }

    fn n_obs(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    /// `log pi(y | phi)` in closed form.
    pub fn log_evidence(&self, phi: f64) -> f64 {
        let n = self.n_obs();
        let s2 = self.noise_sd * self.noise_sd;
        let v = (2.0 * phi).exp();
        let mut cov = DMatrix::from_element(n, n, 1.0 / self.tau_mu);
        let mut group_of = Vec::with_capacity(n);
        for (i, g) in self.groups.iter().enumerate() {
            group_of.extend(std::iter::repeat_n(i, g.len()));
        }
        for a in 0..n {
            for b in 0..n {
                if group_of[a] == group_of[b] {
                    cov[(a, b)] += v;
                }
            }
            cov[(a, a)] += s2;
        }
        let y = DVector::from_iterator(n, self.groups.iter().flatten().copied());
        let ch = cov.cholesky().expect("covariance is positive definite");
        let ld = 2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        -0.5 * (n as f64 * LN_2PI + ld + y.dot(&ch.solve(&y)))
    }

    /// Exact posterior mean and variance of `mu` given `phi`.
    pub fn mu_posterior(&self, phi: f64) -> (f64, f64) {
        // integrate b out: group means carry all information on mu
        let s2 = self.noise_sd * self.noise_sd;
        let v = (2.0 * phi).exp();
        let mut prec = self.tau_mu;
        let mut lin = 0.0;
        for g in &self.groups {
            let m = g.len() as f64;
            let ybar = g.iter().sum::<f64>() / m;
            let var = v + s2 / m;
            prec += 1.0 / var;
            lin += ybar / var;
        }
        (lin / prec, 1.0 / prec)
    }
}

impl LatentModel for GaussianToy {
    fn n_blocks(&self) -> usize {
        self.groups.len()
    }

    fn block_dim(&self) -> usize {
        1
    }

    fn border_dim(&self) -> usize {
        1
    }

    fn hyper_dim(&self) -> usize {
        1
    }

    fn log_hyper_prior(&self, phi: &[f64]) -> f64 {
        let z = (phi[0] - self.prior_mean) / self.prior_sd;
        -0.5 * (LN_2PI + z * z) - self.prior_sd.ln()
    }

    fn log_conditional(&self, chi: &DVector<f64>, phi: &[f64]) -> Result<f64> {
        Ok(self.conditional_derivatives(chi, phi)?.value)
    }

    fn conditional_derivatives(&self, chi: &DVector<f64>, phi: &[f64]) -> Result<LatentDerivatives> {
        let n = self.groups.len();
        let mu = chi[n];
        let v = (2.0 * phi[0]).exp();
        let s2 = self.noise_sd * self.noise_sd;
        let mut h = BorderedMatrix::zeros(n, 1, 1);
        let mut grad = DVector::zeros(n + 1);
        let mut value = -0.5 * (LN_2PI - self.tau_mu.ln()) - 0.5 * self.tau_mu * mu * mu;
        grad[n] = -self.tau_mu * mu;
        h.corner[(0, 0)] = self.tau_mu;
        for (i, g) in self.groups.iter().enumerate() {
            let b = chi[i];
            value += -0.5 * (LN_2PI + v.ln()) - 0.5 * b * b / v;
            grad[i] -= b / v;
            h.blocks[i][(0, 0)] = 1.0 / v + g.len() as f64 / s2;
            h.borders[i][(0, 0)] = g.len() as f64 / s2;
            h.corner[(0, 0)] += g.len() as f64 / s2;
            for y in g {
                let r = y - b - mu;
                value += -0.5 * (LN_2PI + s2.ln()) - 0.5 * r * r / s2;
                grad[i] += r / s2;
                grad[n] += r / s2;
            }
        }
        Ok(LatentDerivatives {
            value,
            grad,
            neg_hess: h,
        })
    }

    fn hyper_names(&self) -> Vec<String> {
        vec!["log_sigma".into()]
    }

    fn hyper_transform(&self, _j: usize) -> super::HyperTransform {
        super::HyperTransform::Exp
    }
}
