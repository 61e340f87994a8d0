//! The joint cure model as a latent Gaussian model.
//!
//! Latent field: `[b_1, .., b_n, beta, psi, gamma0]`.
//! Hyperparameters: `[alpha (or log alpha), gamma, log sigma_1.., atanh rho_12..]`.
//!
//! The association coefficients sit with the hyperparameters: they multiply
//! the random effects, and with both in the latent field the joint mode
//! escapes to `b -> 0`, `|gamma| -> inf`. Given `gamma` the conditional
//! log-density is concave in the latent field.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::explore::{explore_hyper, ExploreOptions, IntegrationGrid};
use super::marginals::{
    latent_marginals_of, posterior_sample, HyperMarginal, HyperTransform, ParameterSummary, PosteriorDraw,
};
use super::{LatentDerivatives, LatentModel, LN_2PI};
use crate::error::{Error, Result};
use crate::likelihood::SubjectEvaluator;
use crate::linalg::{BorderedCholesky, BorderedMatrix};
use crate::model::{self, FixedEffects, JointModelSpec, RandomEffectsSpec, SubjectData};

/// Support of the Gompertz shape in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlphaSupport {
    /// Defective and proper regimes.
    #[default]
    Real,
    /// Proper Gompertz only (`alpha > 0`); no cure fraction.
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    pub tau_beta: f64,
    pub tau_psi: f64,
    pub tau_gamma: f64,
    pub tau_gamma0: f64,
    pub tau_alpha: f64,
    /// Scale of the half-normal prior on each random-effect SD.
    pub sigma_scale: f64,
    /// `atanh(rho)` is uniform on `(-bound, bound)`.
    pub z_rho_bound: f64,
    /// Per-coefficient precisions keyed by coefficient name.
    pub precision_overrides: BTreeMap<String, f64>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            tau_beta: 0.01,
            tau_psi: 0.01,
            tau_gamma: 0.01,
            tau_gamma0: 0.01,
            tau_alpha: 0.01,
            sigma_scale: 10.0,
            z_rho_bound: 4.0,
            precision_overrides: BTreeMap::new(),
        }
    }
}

impl PriorSpec {
    pub fn validate(&self, spec: &JointModelSpec) -> Result<()> {
        let all = [
            self.tau_beta,
            self.tau_psi,
            self.tau_gamma,
            self.tau_gamma0,
            self.tau_alpha,
            self.sigma_scale,
            self.z_rho_bound,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("prior precisions and scales must be finite and > 0".into()));
        }
        let names = spec.theta_names();
        for (k, v) in &self.precision_overrides {
            if !names[..names.len() - 1].contains(k) {
                return Err(Error::Config(format!("precision override for unknown coefficient '{k}'")));
            }
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::Config(format!("precision override for '{k}' must be > 0")));
            }
        }
        Ok(())
    }

    /// Prior precisions of `[beta, psi, gamma, gamma0]`.
    pub fn fixed_precisions(&self, spec: &JointModelSpec) -> Vec<f64> {
        let names = spec.theta_names();
        let p = spec.theta_dim() - 1;
        (0..p)
            .map(|j| {
                if let Some(v) = self.precision_overrides.get(&names[j]) {
                    *v
                } else if j < spec.psi_offset() {
                    self.tau_beta
                } else if j < spec.gamma_offset() {
                    self.tau_psi
                } else if j < spec.gamma0_index() {
                    self.tau_gamma
                } else {
                    self.tau_gamma0
                }
            })
            .collect()
    }
}

pub struct JointLatentModel<'a> {
    spec: &'a JointModelSpec,
    subjects: &'a [SubjectData],
    priors: PriorSpec,
    support: AlphaSupport,
    /// `theta` index of each latent fixed coordinate.
    latent_idx: Vec<usize>,
    precisions: Vec<f64>,
    gamma_precisions: Vec<f64>,
}

impl<'a> JointLatentModel<'a> {
    pub fn new(
        spec: &'a JointModelSpec,
        subjects: &'a [SubjectData],
        priors: PriorSpec,
        support: AlphaSupport,
    ) -> Result<Self> {
        priors.validate(spec)?;
        if subjects.is_empty() {
            return Err(Error::Config("dataset has no subjects".into()));
        }
        for s in subjects {
            s.validate(spec).map_err(|e| e.for_subject(&s.id))?;
        }
        let all = priors.fixed_precisions(spec);
        let gamma_range = spec.gamma_offset()..spec.gamma0_index();
        let latent_idx: Vec<usize> = (0..spec.theta_dim() - 1).filter(|j| !gamma_range.contains(j)).collect();
        let precisions = latent_idx.iter().map(|&j| all[j]).collect();
        let gamma_precisions = all[gamma_range].to_vec();
        Ok(Self {
            spec,
            subjects,
            priors,
            support,
            latent_idx,
            precisions,
            gamma_precisions,
        })
    }

    pub fn spec(&self) -> &JointModelSpec {
        self.spec
    }

    pub fn subjects(&self) -> &[SubjectData] {
        self.subjects
    }

    pub fn support(&self) -> AlphaSupport {
        self.support
    }

    fn d(&self) -> usize {
        self.spec.re_dim()
    }

    fn p(&self) -> usize {
        self.latent_idx.len()
    }

    pub fn alpha(&self, phi: &[f64]) -> f64 {
        match self.support {
            AlphaSupport::Real => phi[0],
            AlphaSupport::Positive => phi[0].exp(),
        }
    }

    pub fn random_effects_spec(&self, phi: &[f64]) -> Result<RandomEffectsSpec> {
        let d = self.d();
        let sigma: Vec<f64> = phi[1 + d..1 + 2 * d].iter().map(|v| v.exp()).collect();
        let corr: Vec<f64> = phi[1 + 2 * d..].iter().map(|v| v.tanh()).collect();
        RandomEffectsSpec::new(self.spec.random_dims(), sigma, corr)
    }

    /// Internal hyperparameters of a given truth.
    pub fn hyper_from(&self, alpha: f64, gamma: &[f64], re: &RandomEffectsSpec) -> Vec<f64> {
        let a = match self.support {
            AlphaSupport::Real => alpha,
            AlphaSupport::Positive => alpha.ln(),
        };
        let mut phi = vec![a];
        phi.extend_from_slice(gamma);
        phi.extend(re.sigma().iter().map(|s| s.ln()));
        phi.extend(re.correlations().iter().map(|r| r.atanh()));
        phi
    }

    /// Full `theta` (alpha included) for a latent field and hyperparameters.
    fn theta(&self, chi: &DVector<f64>, phi: &[f64]) -> Vec<f64> {
        let (off, d) = (self.subjects.len() * self.d(), self.d());
        let mut t = vec![0.0; self.spec.theta_dim()];
        for (k, &j) in self.latent_idx.iter().enumerate() {
            t[j] = chi[off + k];
        }
        t[self.spec.gamma_offset()..self.spec.gamma0_index()].copy_from_slice(&phi[1..1 + d]);
        t[self.spec.alpha_index()] = self.alpha(phi);
        t
    }

    /// Fixed effects and random effects encoded by a latent vector.
    pub fn unpack(&self, chi: &DVector<f64>, phi: &[f64]) -> Result<(FixedEffects, Vec<Vec<f64>>)> {
        let fx = FixedEffects::from_theta(self.spec, &self.theta(chi, phi))?;
        let d = self.d();
        let b = (0..self.subjects.len())
            .map(|i| chi.rows(i * d, d).iter().copied().collect())
            .collect();
        Ok((fx, b))
    }

    /// Latent vector from fixed and random effects.
    pub fn pack(&self, fx: &FixedEffects, b: &[Vec<f64>]) -> DVector<f64> {
        let mut v: Vec<f64> = b.iter().flatten().copied().collect();
        let t = fx.to_theta();
        v.extend(self.latent_idx.iter().map(|&j| t[j]));
        DVector::from_vec(v)
    }

    fn fixed_prior(&self, chi: &DVector<f64>) -> f64 {
        let off = self.subjects.len() * self.d();
        self.precisions
            .iter()
            .enumerate()
            .map(|(j, tau)| 0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * chi[off + j] * chi[off + j])
            .sum()
    }

    pub fn latent_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.latent_dim());
        let re = self.spec.random_effect_names();
        for s in self.subjects {
            names.extend(re.iter().map(|r| format!("b[{}]_{r}", s.id)));
        }
        let t = self.spec.theta_names();
        names.extend(self.latent_idx.iter().map(|&j| t[j].clone()));
        names
    }
}

fn half_normal_log_sigma(log_s: f64, scale: f64) -> f64 {
    let s = log_s.exp();
    std::f64::consts::LN_2 - 0.5 * LN_2PI - scale.ln() - 0.5 * (s / scale).powi(2) + log_s
}

impl LatentModel for JointLatentModel<'_> {
    fn n_blocks(&self) -> usize {
        self.subjects.len()
    }

    fn block_dim(&self) -> usize {
        self.d()
    }

    fn border_dim(&self) -> usize {
        self.p()
    }

    fn hyper_dim(&self) -> usize {
        1 + 2 * self.d() + self.spec.correlation_pairs().len()
    }

    fn log_hyper_prior(&self, phi: &[f64]) -> f64 {
        if phi.len() != self.hyper_dim() || phi.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let d = self.d();
        let tau = self.priors.tau_alpha;
        let mut lp = match self.support {
            AlphaSupport::Real => 0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * phi[0] * phi[0],
            AlphaSupport::Positive => {
                let a = phi[0].exp();
                std::f64::consts::LN_2 + 0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * a * a + phi[0]
            }
        };
        for (g, tau) in phi[1..1 + d].iter().zip(&self.gamma_precisions) {
            lp += 0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * g * g;
        }
        for &ls in &phi[1 + d..1 + 2 * d] {
            lp += half_normal_log_sigma(ls, self.priors.sigma_scale);
        }
        let b = self.priors.z_rho_bound;
        for &z in &phi[1 + 2 * d..] {
            if z.abs() >= b {
                return f64::NEG_INFINITY;
            }
            lp -= (2.0 * b).ln();
        }
        if self.random_effects_spec(phi).is_err() {
            return f64::NEG_INFINITY;
        }
        lp
    }

    fn log_conditional(&self, chi: &DVector<f64>, phi: &[f64]) -> Result<f64> {
        let re = self.random_effects_spec(phi)?;
        let theta = self.theta(chi, phi);
        let d = self.d();
        let parts: Vec<f64> = self
            .subjects
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let b = chi.rows(i * d, d);
                SubjectEvaluator::new(s, self.spec).value(b.as_slice(), &theta) + re.log_density(b.as_slice())
            })
            .collect();
        let v = parts.iter().sum::<f64>() + self.fixed_prior(chi);
        if v.is_nan() {
            return Err(Error::NonFinite {
                term: "joint log-density".into(),
            });
        }
        Ok(v)
    }

    fn conditional_derivatives(&self, chi: &DVector<f64>, phi: &[f64]) -> Result<LatentDerivatives> {
        let re = self.random_effects_spec(phi)?;
        let prec = re.precision();
        let theta = self.theta(chi, phi);
        let (n, d, p) = (self.subjects.len(), self.d(), self.p());
        let parts: Vec<_> = self
            .subjects
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let b = chi.rows(i * d, d);
                let t = SubjectEvaluator::new(s, self.spec).terms(b.as_slice(), &theta);
                (t, re.log_density(b.as_slice()))
            })
            .collect();
        let mut h = BorderedMatrix::zeros(n, d, p);
        let mut grad = DVector::zeros(n * d + p);
        let mut value = self.fixed_prior(chi);
        for (i, (t, lpb)) in parts.into_iter().enumerate() {
            value += t.value + lpb;
            let b = chi.rows(i * d, d).into_owned();
            let gb = t.grad.rows(0, d) - &prec * &b;
            grad.rows_mut(i * d, d).copy_from(&gb);
            let idx = &self.latent_idx;
            for (k, &j) in idx.iter().enumerate() {
                grad[n * d + k] += t.grad[d + j];
                for r in 0..d {
                    h.borders[i][(r, k)] = t.neg_hess[(r, d + j)];
                }
                for (l, &jj) in idx.iter().enumerate() {
                    h.corner[(k, l)] += t.neg_hess[(d + j, d + jj)];
                }
            }
            h.blocks[i] = t.neg_hess.view((0, 0), (d, d)) + &prec;
        }
        for j in 0..p {
            grad[n * d + j] -= self.precisions[j] * chi[n * d + j];
            h.corner[(j, j)] += self.precisions[j];
        }
        if !value.is_finite() {
            return Err(Error::NonFinite {
                term: "joint log-density".into(),
            });
        }
        Ok(LatentDerivatives {
            value,
            grad,
            neg_hess: h,
        })
    }

    /// Each subject's Hessian contribution depends on its own random effects
    /// and the shared coefficients only, so the trace `tr(H^{-1} dH)` needs
    /// the local blocks of `H^{-1}` and central differences of the subject
    /// curvature. The random-effects and prior precisions are constant.
    fn log_det_gradient(
        &self,
        chi: &DVector<f64>,
        phi: &[f64],
        chol: &BorderedCholesky,
    ) -> Result<Option<DVector<f64>>> {
        let theta = self.theta(chi, phi);
        let (n, d, p) = (self.subjects.len(), self.d(), self.p());
        let border_cov = chol.border_covariance();
        let local_curvature = |ev: &SubjectEvaluator, b: &[f64], th: &[f64]| {
            let h = ev.terms(b, th).neg_hess;
            let at = |r: usize| if r < d { r } else { d + self.latent_idx[r - d] };
            DMatrix::from_fn(d + p, d + p, |r, c| h[(at(r), at(c))])
        };
        let parts: Vec<DVector<f64>> = self
            .subjects
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let ev = SubjectEvaluator::new(s, self.spec);
                let cov = chol.local_covariance(i, &border_cov);
                let b0: Vec<f64> = chi.rows(i * d, d).iter().copied().collect();
                DVector::from_fn(d + p, |k, _| {
                    let (mut bp, mut bm, mut tp, mut tm) = (b0.clone(), b0.clone(), theta.clone(), theta.clone());
                    let x = if k < d { b0[k] } else { theta[self.latent_idx[k - d]] };
                    let step = 1e-4 * x.abs().max(1.0);
                    if k < d {
                        bp[k] += step;
                        bm[k] -= step;
                    } else {
                        tp[self.latent_idx[k - d]] += step;
                        tm[self.latent_idx[k - d]] -= step;
                    }
                    let dh = (local_curvature(&ev, &bp, &tp) - local_curvature(&ev, &bm, &tm)) / (2.0 * step);
                    cov.component_mul(&dh).sum()
                })
            })
            .collect();
        let mut grad = DVector::zeros(n * d + p);
        for (i, g) in parts.iter().enumerate() {
            grad.rows_mut(i * d, d).copy_from(&g.rows(0, d));
            for k in 0..p {
                grad[n * d + k] += g[d + k];
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                term: "log-determinant gradient".into(),
            });
        }
        Ok(Some(grad))
    }

    fn initial_hyper(&self) -> Vec<f64> {
        let mut phi = vec![0.0; self.hyper_dim()];
        if self.support == AlphaSupport::Positive {
            phi[0] = 0.1f64.ln();
        }
        phi
    }

    fn hyper_bounds(&self) -> Vec<(f64, f64)> {
        let b = self.priors.z_rho_bound;
        (0..self.hyper_dim())
            .map(|j| {
                if j > 2 * self.d() {
                    (-b, b)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                }
            })
            .collect()
    }

    fn hyper_names(&self) -> Vec<String> {
        let re = self.spec.random_effect_names();
        let mut names = vec!["alpha".to_string()];
        names.extend(re.iter().map(|r| format!("gamma_{r}")));
        names.extend(re.iter().map(|r| format!("sigma_{r}")));
        names.extend(
            self.spec
                .correlation_pairs()
                .iter()
                .map(|&(i, j)| format!("rho_{}_{}", re[i], re[j])),
        );
        names
    }

    fn hyper_transform(&self, j: usize) -> HyperTransform {
        if j == 0 {
            match self.support {
                AlphaSupport::Real => HyperTransform::Identity,
                AlphaSupport::Positive => HyperTransform::Exp,
            }
        } else if j <= self.d() {
            HyperTransform::Identity
        } else if j <= 2 * self.d() {
            HyperTransform::Exp
        } else {
            HyperTransform::Tanh
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub explore: ExploreOptions,
    pub n_draws: usize,
    pub alpha_support: AlphaSupport,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            explore: ExploreOptions::default(),
            n_draws: 1000,
            alpha_support: AlphaSupport::Real,
        }
    }
}

/// Result of the nested Laplace fit.
pub struct JointFit<'a> {
    pub model: JointLatentModel<'a>,
    pub grid: IntegrationGrid,
}

/// Per-subject cure probability from posterior draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CureSummary {
    pub id: String,
    pub group: Option<String>,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Group average of the per-subject means and interval limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCure {
    pub group: String,
    pub n: usize,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
    pub hazard_ratios: Vec<ParameterSummary>,
    pub cure: Vec<CureSummary>,
    pub groups: Vec<GroupCure>,
    pub prob_alpha_negative: f64,
    pub n_draws: usize,
}

impl PosteriorSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Quantile with linear interpolation between order statistics.
pub(crate) fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sample_summary(name: &str, values: &[f64]) -> ParameterSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    ParameterSummary {
        name: name.to_string(),
        mean,
        sd: var.sqrt(),
        q025: empirical_quantile(&s, 0.025),
        q975: empirical_quantile(&s, 0.975),
    }
}

pub fn fit<'a>(
    spec: &'a JointModelSpec,
    subjects: &'a [SubjectData],
    priors: &PriorSpec,
    options: &FitOptions,
) -> Result<JointFit<'a>> {
    let model = JointLatentModel::new(spec, subjects, priors.clone(), options.alpha_support)?;
    let grid = explore_hyper(&model, &options.explore)?;
    Ok(JointFit { model, grid })
}

impl JointFit<'_> {
    pub fn hyper_marginals(&self) -> Vec<HyperMarginal> {
        let cov = self.grid.hyper_covariance();
        (0..self.model.hyper_dim())
            .map(|j| HyperMarginal {
                mode: self.grid.hyper_mode[j],
                sd: cov[(j, j)].max(0.0).sqrt(),
                transform: self.model.hyper_transform(j),
            })
            .collect()
    }

    /// Coefficients in `theta` order, then the SDs and correlations. Latent
    /// coefficients are grid mixtures; `alpha`, `gamma` and the covariance
    /// parameters are Gaussian in the internal scale.
    pub fn parameter_table(&self) -> Vec<ParameterSummary> {
        let spec = self.model.spec();
        let off = self.model.n_blocks() * self.model.block_dim();
        let coords: Vec<usize> = (off..off + self.model.border_dim()).collect();
        let names = spec.theta_names();
        let mut by_theta: Vec<Option<ParameterSummary>> = vec![None; names.len()];
        for (m, &j) in latent_marginals_of(&self.grid, &coords).iter().zip(&self.model.latent_idx) {
            by_theta[j] = Some(m.summary(&names[j]));
        }
        let hyper: Vec<ParameterSummary> = self
            .hyper_marginals()
            .iter()
            .zip(&self.model.hyper_names())
            .map(|(h, n)| h.summary(n))
            .collect();
        let d = spec.re_dim();
        for k in 0..d {
            let j = spec.gamma_offset() + k;
            by_theta[j] = Some(ParameterSummary {
                name: names[j].clone(),
                ..hyper[1 + k].clone()
            });
        }
        by_theta[spec.alpha_index()] = Some(hyper[0].clone());
        let mut out: Vec<ParameterSummary> = by_theta.into_iter().map(|s| s.expect("every coefficient")).collect();
        out.extend(hyper.into_iter().skip(1 + d));
        out
    }

    pub fn sample(&self, n_draws: usize, rng: &mut impl Rng) -> Vec<PosteriorDraw> {
        posterior_sample(&self.grid, n_draws, rng)
    }

    /// Per-subject cure probability for every draw (`draws x subjects`).
    pub fn cure_draws(&self, draws: &[PosteriorDraw]) -> Result<DMatrix<f64>> {
        let n = self.model.n_blocks();
        let mut out = DMatrix::zeros(draws.len(), n);
        for (r, dr) in draws.iter().enumerate() {
            let (fx, b) = self.model.unpack(&dr.chi, &dr.phi)?;
            for (i, s) in self.model.subjects().iter().enumerate() {
                let eta: f64 = s.survival_covariates.iter().zip(&fx.psi).map(|(w, p)| w * p).sum::<f64>()
                    + b[i].iter().zip(&fx.gamma).map(|(x, g)| x * g).sum::<f64>();
                out[(r, i)] = model::subject_cure_fraction(&fx, eta);
            }
        }
        Ok(out)
    }

    /// Full report. `groups`, when given, labels each subject for the
    /// group-average cure fractions.
    pub fn summarize(&self, draws: &[PosteriorDraw], groups: Option<&[String]>) -> Result<PosteriorSummary> {
        if draws.is_empty() {
            return Err(Error::Config("summaries need at least one posterior draw".into()));
        }
        let subjects = self.model.subjects();
        if let Some(g) = groups {
            if g.len() != subjects.len() {
                return Err(Error::DimensionMismatch {
                    context: "group labels".into(),
                    expected: subjects.len(),
                    got: g.len(),
                });
            }
        }
        let spec = self.model.spec();
        let off = self.model.n_blocks() * self.model.block_dim();
        let hazard_ratios = spec
            .survival_covariates()
            .iter()
            .enumerate()
            .map(|(j, c)| {
                // psi precedes gamma, so its latent position equals its theta index
                let v: Vec<f64> = draws.iter().map(|d| d.chi[off + spec.psi_offset() + j].exp()).collect();
                sample_summary(&format!("HR_{c}"), &v)
            })
            .collect();
        let cd = self.cure_draws(draws)?;
        let cure: Vec<CureSummary> = subjects
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let col: Vec<f64> = cd.column(i).iter().copied().collect();
                let ss = sample_summary(&s.id, &col);
                CureSummary {
                    id: s.id.clone(),
                    group: groups.map(|g| g[i].clone()),
                    mean: ss.mean,
                    q025: ss.q025,
                    q975: ss.q975,
                }
            })
            .collect();
        let mut by: BTreeMap<String, Vec<&CureSummary>> = BTreeMap::new();
        for c in &cure {
            by.entry(c.group.clone().unwrap_or_else(|| "all".into())).or_default().push(c);
        }
        let groups = by
            .into_iter()
            .map(|(g, v)| {
                let n = v.len() as f64;
                GroupCure {
                    group: g,
                    n: v.len(),
                    mean: v.iter().map(|c| c.mean).sum::<f64>() / n,
                    q025: v.iter().map(|c| c.q025).sum::<f64>() / n,
                    q975: v.iter().map(|c| c.q975).sum::<f64>() / n,
                }
            })
            .collect();
        let prob_alpha_negative = match self.model.support() {
            AlphaSupport::Positive => 0.0,
            AlphaSupport::Real => {
                let h = self.hyper_marginals()[0];
                0.5 * statrs::function::erf::erfc(h.mode / (h.sd * std::f64::consts::SQRT_2))
            }
        };
        Ok(PosteriorSummary {
            parameters: self.parameter_table(),
            hazard_ratios,
            cure,
            groups,
            prob_alpha_negative,
            n_draws: draws.len(),
        })
    }

    /// Posterior mean and 95% band of the group-average survival curve on
    /// `times`, one row per `(group, time)`.
    pub fn survival_curves(
        &self,
        draws: &[PosteriorDraw],
        groups: Option<&[String]>,
        times: &[f64],
    ) -> Result<Vec<(String, f64, ParameterSummary)>> {
        let subjects = self.model.subjects();
        let labels: Vec<String> = match groups {
            Some(g) => g.to_vec(),
            None => vec!["all".into(); subjects.len()],
        };
        let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, g) in labels.iter().enumerate() {
            members.entry(g.as_str()).or_default().push(i);
        }
        // per draw: log rates of every subject
        let rates: Vec<(f64, Vec<f64>)> = draws
            .iter()
            .map(|dr| {
                let (fx, b) = self.model.unpack(&dr.chi, &dr.phi)?;
                let lr = subjects
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        fx.gamma0
                            + s.survival_covariates.iter().zip(&fx.psi).map(|(w, p)| w * p).sum::<f64>()
                            + b[i].iter().zip(&fx.gamma).map(|(x, g)| x * g).sum::<f64>()
                    })
                    .collect();
                Ok((fx.alpha, lr))
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for (g, idx) in &members {
            for &t in times {
                let vals: Vec<f64> = rates
                    .iter()
                    .map(|(alpha, lr)| {
                        let g = crate::gompertz::integrated_exp(*alpha, t);
                        idx.iter().map(|&i| (-(lr[i].exp() * g)).exp()).sum::<f64>() / idx.len() as f64
                    })
                    .collect();
                out.push((g.to_string(), t, sample_summary("S", &vals)));
            }
        }
        Ok(out)
    }
}
