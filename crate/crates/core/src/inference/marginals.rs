//! Posterior marginals and draws from the grid mixture.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use super::explore::IntegrationGrid;
use crate::linalg::BorderedCholesky;
use crate::quadrature::normal_expectation;

const Z975: f64 = 1.959_963_984_540_054;

/// Mean, SD and equal-tailed 95% interval of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

impl ParameterSummary {
    pub fn covers(&self, x: f64) -> bool {
        self.q025 <= x && x <= self.q975
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl GaussianMixture {
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(w, (m, s))| w * (s * s + (m - mu) * (m - mu)))
            .sum()
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(w, (m, s))| {
                let c = if *s > 0.0 {
                    std_normal_cdf((x - m) / s)
                } else if x >= *m {
                    1.0
                } else {
                    0.0
                };
                w * c
            })
            .sum()
    }

    /// Inverse CDF by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        let lo0 = self
            .means
            .iter()
            .zip(&self.sds)
            .map(|(m, s)| m - 12.0 * s)
            .fold(f64::INFINITY, f64::min);
        let hi0 = self
            .means
            .iter()
            .zip(&self.sds)
            .map(|(m, s)| m + 12.0 * s)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn summary(&self, name: &str) -> ParameterSummary {
        ParameterSummary {
            name: name.to_string(),
            mean: self.mean(),
            sd: self.sd(),
            q025: self.quantile(0.025),
            q975: self.quantile(0.975),
        }
    }
}

/// Marginal variances of `N(chi*, H^{-1})`.
pub(crate) fn latent_variances(chol: &BorderedCholesky) -> DVector<f64> {
    let (n, d, p) = (chol.n_blocks(), chol.block_dim(), chol.border_dim());
    let mut v = DVector::zeros(chol.dim());
    let cf = chol.border_covariance();
    for i in 0..n {
        let c = chol.local_covariance(i, &cf);
        for k in 0..d {
            v[i * d + k] = c[(k, k)];
        }
    }
    for k in 0..p {
        v[n * d + k] = cf[(k, k)];
    }
    v
}

/// Gaussian-mixture marginal of latent coordinate `j`.
pub fn latent_marginal(grid: &IntegrationGrid, j: usize) -> GaussianMixture {
    latent_marginals_of(grid, &[j]).pop().expect("one coordinate requested")
}

/// Marginals of every latent coordinate.
pub fn latent_marginals(grid: &IntegrationGrid) -> Vec<GaussianMixture> {
    let dim = grid.points[0].mode.chi.len();
    latent_marginals_of(grid, &(0..dim).collect::<Vec<_>>())
}

pub(crate) fn latent_marginals_of(grid: &IntegrationGrid, coords: &[usize]) -> Vec<GaussianMixture> {
    let vars: Vec<DVector<f64>> = grid.points.par_iter().map(|p| latent_variances(&p.mode.chol)).collect();
    let weights: Vec<f64> = grid.points.iter().map(|p| p.weight).collect();
    coords
        .iter()
        .map(|&j| GaussianMixture {
            weights: weights.clone(),
            means: grid.points.iter().map(|p| p.mean[j]).collect(),
            sds: vars.iter().map(|v| v[j].max(0.0).sqrt()).collect(),
        })
        .collect()
}

/// Reporting scale of a hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperTransform {
    Identity,
    Exp,
    Tanh,
}

impl HyperTransform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            HyperTransform::Identity => x,
            HyperTransform::Exp => x.exp(),
            HyperTransform::Tanh => x.tanh(),
        }
    }
}

/// Gaussian approximation of one hyperparameter's marginal in the internal
/// scale, centred at the mode with the inverse-curvature variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperMarginal {
    pub mode: f64,
    pub sd: f64,
    pub transform: HyperTransform,
}

impl HyperMarginal {
    pub fn summary(&self, name: &str) -> ParameterSummary {
        let f = |x: f64| self.transform.apply(x);
        let mean = normal_expectation(self.mode, self.sd, 40, f);
        let second = normal_expectation(self.mode, self.sd, 40, |x| f(x).powi(2));
        // transforms are increasing, so quantiles map through
        ParameterSummary {
            name: name.to_string(),
            mean,
            sd: (second - mean * mean).max(0.0).sqrt(),
            q025: f(self.mode - Z975 * self.sd),
            q975: f(self.mode + Z975 * self.sd),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorDraw {
    /// Grid point the draw came from.
    pub point: usize,
    pub phi: Vec<f64>,
    pub chi: DVector<f64>,
}

/// Draws `phi_h` by grid weight, then `chi ~ N(m_h, H_h^{-1})` with `m_h`
/// the point's centre.
pub fn posterior_sample(grid: &IntegrationGrid, n_draws: usize, rng: &mut impl Rng) -> Vec<PosteriorDraw> {
    let cum: Vec<f64> = grid
        .points
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.weight;
            Some(*acc)
        })
        .collect();
    let total = *cum.last().expect("grid is nonempty");
    (0..n_draws)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let h = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
            let pt = &grid.points[h];
            let z = DVector::from_fn(pt.mode.chi.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            PosteriorDraw {
                point: h,
                phi: pt.phi.clone(),
                chi: &pt.mean + pt.mode.chol.solve_upper(&z),
            }
        })
        .collect()
}
