//! Per-subject likelihood contributions and their random-effect integrals.
//!
//! The conditional log-likelihood of subject `i` given `b_i` is the sum of its
//! Poisson log-masses, the survival term `delta log h(T) - H(T)`, and the
//! Gaussian log-density of `b_i`. The marginal contribution integrates `b_i`
//! out, either by a Laplace approximation at the conditional mode or by
//! adaptive Gauss-Hermite quadrature centred and scaled at that mode.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gompertz::{IntegratedExp, LOG_CLAMP};
use crate::model::{
    self, FixedEffects, JointModelSpec, RandomEffects, RandomEffectsSpec, SubjectData,
};
use crate::quadrature::gauss_hermite;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Pieces of one subject's conditional log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectLogLik {
    pub longitudinal: f64,
    pub survival: f64,
    pub prior_b: f64,
    pub total: f64,
}

/// `y log(lambda) - lambda - log(y!)`.
pub fn poisson_loglik(y: u64, log_lambda: f64) -> Result<f64> {
    if !log_lambda.is_finite() {
        return Err(Error::NonFinite {
            term: format!("Poisson log-mean {log_lambda}"),
        });
    }
    let yf = y as f64;
    let lgam = ln_gamma(yf + 1.0);
    let rate = log_lambda.min(LOG_CLAMP).exp();
    Ok(yf * log_lambda - rate - lgam)
}

/// `delta log h(T*) - H(T*)` for the hazard `exp(alpha t + gamma0 + eta_s)`.
pub fn survival_loglik(subject: &SubjectData, fx: &FixedEffects, eta_s: f64) -> Result<f64> {
    let t = subject.observed_time;
    let cum = model::subject_cumulative_hazard(t, fx, eta_s)?;
    let log_h = fx.alpha * t + fx.gamma0 + eta_s;
    Ok(if subject.event { log_h - cum } else { -cum })
}

pub fn conditional_loglik(
    subject: &SubjectData,
    fx: &FixedEffects,
    re: &RandomEffectsSpec,
    b: &RandomEffects,
) -> Result<SubjectLogLik> {
    let mut longitudinal = 0.0;
    for rec in &subject.records {
        let eta = model::longitudinal_linear_predictor(rec, fx, b)?;
        longitudinal += poisson_loglik(rec.count, eta)?;
    }
    let eta_s = model::survival_linear_predictor(&subject.survival_covariates, fx, b)?;
    let survival = survival_loglik(subject, fx, eta_s)?;
    let prior_b = re.log_density(b.values());
    Ok(SubjectLogLik {
        longitudinal,
        survival,
        prior_b,
        total: longitudinal + survival + prior_b,
    })
}

/// Value, gradient and negative Hessian of the data part of one subject's
/// log-likelihood in the coordinates `v = [b_i, theta]`.
#[derive(Debug, Clone)]
pub(crate) struct DataTerms {
    pub value: f64,
    pub grad: DVector<f64>,
    pub neg_hess: DMatrix<f64>,
}

/// Evaluates the data log-likelihood of one subject and its derivatives with
/// respect to the random effects and the full fixed-effect vector.
pub(crate) struct SubjectEvaluator<'a> {
    pub subject: &'a SubjectData,
    pub spec: &'a JointModelSpec,
}

/// Sparse gradient of a linear predictor: `(coordinate, coefficient)`.
type SparseGrad = Vec<(usize, f64)>;

impl<'a> SubjectEvaluator<'a> {
    pub fn new(subject: &'a SubjectData, spec: &'a JointModelSpec) -> Self {
        Self { subject, spec }
    }

    fn d(&self) -> usize {
        self.spec.re_dim()
    }

    pub fn coord_dim(&self) -> usize {
        self.d() + self.spec.theta_dim()
    }

    fn record_predictor(&self, rec: &model::LongitudinalRecord, b: &[f64], theta: &[f64]) -> (f64, SparseGrad) {
        let d = self.d();
        let k = rec.biomarker;
        let bo = d + self.spec.beta_offset(k);
        let ro = self.spec.re_offset(k);
        let mut grad = Vec::with_capacity(rec.fixed_covariates.len() + rec.random_design.len());
        let mut eta = 0.0;
        for (j, x) in rec.fixed_covariates.iter().enumerate() {
            eta += x * theta[bo - d + j];
            grad.push((bo + j, *x));
        }
        for (j, z) in rec.random_design.iter().enumerate() {
            eta += z * b[ro + j];
            grad.push((ro + j, *z));
        }
        (eta, grad)
    }

    fn survival_predictor(&self, b: &[f64], theta: &[f64]) -> (f64, SparseGrad) {
        let d = self.d();
        let spec = self.spec;
        let w = &self.subject.survival_covariates;
        let mut grad = Vec::with_capacity(w.len() + 2 * d + 1);
        let mut s = theta[spec.gamma0_index()];
        for (j, wj) in w.iter().enumerate() {
            s += wj * theta[spec.psi_offset() + j];
            grad.push((d + spec.psi_offset() + j, *wj));
        }
        for j in 0..d {
            let g = theta[spec.gamma_offset() + j];
            s += b[j] * g;
            grad.push((j, g));
            grad.push((d + spec.gamma_offset() + j, b[j]));
        }
        grad.push((d + spec.gamma0_index(), 1.0));
        (s, grad)
    }

    /// `log H(T)` and the `alpha`-derivative ratios of `G`.
    fn cumulative(&self, s: f64, alpha: f64) -> (f64, IntegratedExp) {
        let ie = IntegratedExp::new(alpha, self.subject.observed_time);
        let log_h = s + ie.log_g;
        let cum = if log_h == f64::NEG_INFINITY {
            0.0
        } else {
            log_h.min(LOG_CLAMP).exp()
        };
        (cum, ie)
    }

    pub fn value(&self, b: &[f64], theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for rec in &self.subject.records {
            let (eta, _) = self.record_predictor(rec, b, theta);
            let yf = rec.count as f64;
            total += yf * eta - eta.min(LOG_CLAMP).exp() - ln_gamma(yf + 1.0);
        }
        let alpha = theta[self.spec.alpha_index()];
        let (s, _) = self.survival_predictor(b, theta);
        let (cum, _) = self.cumulative(s, alpha);
        let t = self.subject.observed_time;
        if self.subject.event {
            total += alpha * t + s;
        }
        total - cum
    }

    pub fn terms(&self, b: &[f64], theta: &[f64]) -> DataTerms {
        let n = self.coord_dim();
        let d = self.d();
        let mut grad = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let mut value = 0.0;

        for rec in &self.subject.records {
            let (eta, g) = self.record_predictor(rec, b, theta);
            let yf = rec.count as f64;
            let lambda = eta.min(LOG_CLAMP).exp();
            value += yf * eta - lambda - ln_gamma(yf + 1.0);
            let resid = yf - lambda;
            for &(i, ci) in &g {
                grad[i] += resid * ci;
                for &(j, cj) in &g {
                    h[(i, j)] += lambda * ci * cj;
                }
            }
        }

        let spec = self.spec;
        let alpha_i = d + spec.alpha_index();
        let alpha = theta[spec.alpha_index()];
        let t = self.subject.observed_time;
        let delta = if self.subject.event { 1.0 } else { 0.0 };
        let (s, g) = self.survival_predictor(b, theta);
        let (cum, ie) = self.cumulative(s, alpha);
        value += delta * (alpha * t + s) - cum;
        let resid = delta - cum;
        for &(i, ci) in &g {
            grad[i] += resid * ci;
            for &(j, cj) in &g {
                h[(i, j)] += cum * ci * cj;
            }
            h[(i, alpha_i)] += cum * ie.d1_ratio * ci;
            h[(alpha_i, i)] += cum * ie.d1_ratio * ci;
        }
        // second derivative of s: d^2 s / db_j dgamma_j = 1
        for j in 0..d {
            let gj = d + spec.gamma_offset() + j;
            h[(j, gj)] -= resid;
            h[(gj, j)] -= resid;
        }
        grad[alpha_i] += delta * t - cum * ie.d1_ratio;
        h[(alpha_i, alpha_i)] += cum * ie.d2_ratio;

        DataTerms {
            value,
            grad,
            neg_hess: h,
        }
    }

    /// `tr(A^{-1} dA/dv_m)` for every coordinate `m`, where
    /// `A = -d^2 loglik / db db'` (data part; the prior precision is constant).
    pub fn trace_derivatives(&self, b: &[f64], theta: &[f64], a_inv: &DMatrix<f64>) -> DVector<f64> {
        let n = self.coord_dim();
        let d = self.d();
        let spec = self.spec;
        let mut out = DVector::zeros(n);
        for rec in &self.subject.records {
            let (eta, g) = self.record_predictor(rec, b, theta);
            let lambda = eta.min(LOG_CLAMP).exp();
            // z' A^{-1} z over the b coordinates of this record
            let zb: Vec<&(usize, f64)> = g.iter().filter(|(i, _)| *i < d).collect();
            let mut q = 0.0;
            for &&(i, ci) in &zb {
                for &&(j, cj) in &zb {
                    q += ci * a_inv[(i, j)] * cj;
                }
            }
            for &(i, ci) in &g {
                out[i] += lambda * q * ci;
            }
        }
        let alpha = theta[spec.alpha_index()];
        let (s, g) = self.survival_predictor(b, theta);
        let (cum, ie) = self.cumulative(s, alpha);
        let gamma = DVector::from_column_slice(&theta[spec.gamma_offset()..spec.gamma0_index()]);
        let a_inv_gamma = a_inv * &gamma;
        let q = gamma.dot(&a_inv_gamma);
        for &(i, ci) in &g {
            out[i] += cum * q * ci;
        }
        out[d + spec.alpha_index()] += cum * ie.d1_ratio * q;
        for j in 0..d {
            out[d + spec.gamma_offset() + j] += cum * 2.0 * a_inv_gamma[j];
        }
        out
    }
}

/// A smooth log-density in `b` whose integral over `R^d` is wanted.
pub trait LogIntegrand {
    fn dim(&self) -> usize;
    fn value(&self, b: &[f64]) -> Result<f64>;
    /// Value, gradient and negative Hessian.
    fn derivatives(&self, b: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)>;
}

/// Inner Newton settings.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            grad_tol: 1e-8,
            max_halvings: 30,
        }
    }
}

/// Maximum of a [`LogIntegrand`] with the curvature there.
#[derive(Debug, Clone)]
pub struct IntegrandMode {
    pub b: DVector<f64>,
    pub value: f64,
    pub neg_hessian: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
    pub iterations: usize,
}

impl IntegrandMode {
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }
}

pub fn find_mode(f: &impl LogIntegrand, start: Option<&[f64]>, opts: &NewtonOptions) -> Result<IntegrandMode> {
    let d = f.dim();
    let mut b = match start {
        Some(s) => DVector::from_column_slice(s),
        None => DVector::zeros(d),
    };
    let mut grad_norm = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let (value, grad, neg_h) = f.derivatives(b.as_slice())?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                term: "conditional log-likelihood".into(),
            });
        }
        grad_norm = grad.amax();
        let chol = Cholesky::new(neg_h.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("negative Hessian of the conditional log-likelihood".into()))?;
        if grad_norm < opts.grad_tol {
            return Ok(IntegrandMode {
                b,
                value,
                neg_hessian: neg_h,
                chol,
                iterations: it,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let step = chol.solve(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand = &b + &step * t;
            let v = f.value(cand.as_slice())?;
            if v.is_finite() && v >= value - 1e-12 * value.abs().max(1.0) {
                b = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::ModeNotFound {
        iterations: opts.max_iter,
        grad_norm,
    })
}

/// Negative Hessian by central differences of the gradient (debug path).
pub fn finite_difference_neg_hessian(f: &impl LogIntegrand, b: &[f64]) -> Result<DMatrix<f64>> {
    let d = f.dim();
    let mut h = DMatrix::zeros(d, d);
    for j in 0..d {
        let eps = 1e-5 * b[j].abs().max(1.0);
        let mut bp = b.to_vec();
        bp[j] += eps;
        let mut bm = b.to_vec();
        bm[j] -= eps;
        let (_, gp, _) = f.derivatives(&bp)?;
        let (_, gm, _) = f.derivatives(&bm)?;
        for i in 0..d {
            h[(i, j)] = -(gp[i] - gm[i]) / (2.0 * eps);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// `log integral exp(f)` by the Laplace approximation at `mode`.
pub fn laplace_from_mode(mode: &IntegrandMode) -> f64 {
    let d = mode.b.len() as f64;
    mode.value + 0.5 * d * LN_2PI - 0.5 * mode.log_det()
}

/// `log integral exp(f)` by tensor-product Gauss-Hermite quadrature centred
/// at `mode` and scaled by its curvature.
pub fn adaptive_gauss_hermite_from_mode(f: &impl LogIntegrand, mode: &IntegrandMode, nodes: usize) -> Result<f64> {
    let d = f.dim();
    let (x, lw) = gauss_hermite(nodes);
    let l = mode.chol.l();
    let mut idx = vec![0usize; d];
    let mut terms = Vec::with_capacity(nodes.pow(d as u32));
    let sqrt2 = std::f64::consts::SQRT_2;
    loop {
        let xv = DVector::from_iterator(d, idx.iter().map(|&i| x[i]));
        let shift = l
            .tr_solve_lower_triangular(&(xv.clone() * sqrt2))
            .expect("Cholesky factor has a positive diagonal");
        let point = &mode.b + shift;
        let lw_sum: f64 = idx.iter().map(|&i| lw[i] + x[i] * x[i]).sum();
        terms.push(lw_sum + f.value(point.as_slice())?);
        // advance the multi-index
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    Ok(log_sum_exp(&terms) + 0.5 * d as f64 * (2.0f64).ln() - 0.5 * mode.log_det())
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Conditional log-likelihood of one subject as a function of `b_i`.
pub struct SubjectIntegrand<'a> {
    eval: SubjectEvaluator<'a>,
    theta: Vec<f64>,
    precision: DMatrix<f64>,
    prior_const: f64,
}

impl<'a> SubjectIntegrand<'a> {
    pub fn new(
        subject: &'a SubjectData,
        spec: &'a JointModelSpec,
        fx: &FixedEffects,
        re: &RandomEffectsSpec,
    ) -> Result<Self> {
        fx.validate(spec)?;
        subject.validate(spec)?;
        if re.dim() != spec.re_dim() {
            return Err(Error::DimensionMismatch {
                context: "random-effect covariance".into(),
                expected: spec.re_dim(),
                got: re.dim(),
            });
        }
        let d = re.dim() as f64;
        Ok(Self {
            eval: SubjectEvaluator::new(subject, spec),
            theta: fx.to_theta(),
            precision: re.precision(),
            prior_const: -0.5 * (d * LN_2PI + re.log_det_covariance()),
        })
    }

    fn prior(&self, b: &DVector<f64>) -> f64 {
        self.prior_const - 0.5 * b.dot(&(&self.precision * b))
    }
}

impl LogIntegrand for SubjectIntegrand<'_> {
    fn dim(&self) -> usize {
        self.precision.nrows()
    }

    fn value(&self, b: &[f64]) -> Result<f64> {
        let v = self.eval.value(b, &self.theta) + self.prior(&DVector::from_column_slice(b));
        Ok(v)
    }

    fn derivatives(&self, b: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let d = self.dim();
        let t = self.eval.terms(b, &self.theta);
        let bv = DVector::from_column_slice(b);
        let qb = &self.precision * &bv;
        let value = t.value + self.prior_const - 0.5 * bv.dot(&qb);
        let grad = t.grad.rows(0, d) - qb;
        let neg_h = t.neg_hess.view((0, 0), (d, d)) + &self.precision;
        Ok((value, grad, neg_h))
    }
}

/// How the random effects are integrated out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Laplace,
    /// Adaptive Gauss-Hermite with this many nodes per dimension.
    Quadrature(usize),
}

pub fn marginal_loglik_subject(
    subject: &SubjectData,
    spec: &JointModelSpec,
    fx: &FixedEffects,
    re: &RandomEffectsSpec,
    method: Method,
) -> Result<f64> {
    let f = SubjectIntegrand::new(subject, spec, fx, re)?;
    let mode = find_mode(&f, None, &NewtonOptions::default())?;
    match method {
        Method::Laplace => Ok(laplace_from_mode(&mode)),
        Method::Quadrature(n) => adaptive_gauss_hermite_from_mode(&f, &mode, n),
    }
}

/// Sum of the subjects' marginal log-likelihoods.
pub fn total_loglik(
    subjects: &[SubjectData],
    spec: &JointModelSpec,
    fx: &FixedEffects,
    re: &RandomEffectsSpec,
    method: Method,
) -> Result<f64> {
    let mut parts = subjects
        .par_iter()
        .map(|s| marginal_loglik_subject(s, spec, fx, re, method).map_err(|e| e.for_subject(&s.id)))
        .collect::<Result<Vec<f64>>>()?;
    // summing in sorted order makes the total exactly permutation invariant
    parts.sort_by(f64::total_cmp);
    Ok(parts.iter().sum())
}

/// Laplace marginal log-likelihood of one subject and its gradient with
/// respect to `theta` (layout of [`FixedEffects::to_theta`]).
pub fn marginal_loglik_subject_gradient(
    subject: &SubjectData,
    spec: &JointModelSpec,
    fx: &FixedEffects,
    re: &RandomEffectsSpec,
) -> Result<(f64, DVector<f64>)> {
    let f = SubjectIntegrand::new(subject, spec, fx, re)?;
    let mode = find_mode(&f, None, &NewtonOptions::default())?;
    let value = laplace_from_mode(&mode);
    let d = spec.re_dim();
    let p = spec.theta_dim();
    let theta = fx.to_theta();
    let terms = f.eval.terms(mode.b.as_slice(), &theta);
    let a_inv = mode.chol.inverse();
    let traces = f.eval.trace_derivatives(mode.b.as_slice(), &theta, &a_inv);
    // db*/dtheta = -A^{-1} N_{b theta}
    let n_bt = terms.neg_hess.view((0, d), (d, p)).into_owned();
    let db = -(&a_inv * n_bt);
    let tr_b = traces.rows(0, d);
    let mut grad = DVector::zeros(p);
    for j in 0..p {
        let chain = tr_b.dot(&db.column(j));
        grad[j] = terms.grad[d + j] - 0.5 * (traces[d + j] + chain);
    }
    Ok((value, grad))
}

/// Laplace total log-likelihood and its gradient in `theta`.
pub fn total_loglik_gradient(
    subjects: &[SubjectData],
    spec: &JointModelSpec,
    fx: &FixedEffects,
    re: &RandomEffectsSpec,
) -> Result<(f64, DVector<f64>)> {
    let parts: Vec<Result<(f64, DVector<f64>)>> = subjects
        .par_iter()
        .map(|s| marginal_loglik_subject_gradient(s, spec, fx, re).map_err(|e| e.for_subject(&s.id)))
        .collect();
    let mut total = 0.0;
    let mut grad = DVector::zeros(spec.theta_dim());
    for p in parts {
        let (v, g) = p?;
        total += v;
        grad += g;
    }
    Ok((total, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BiomarkerSpec, LongitudinalRecord, INTERCEPT, TIME};

    fn spec() -> JointModelSpec {
        JointModelSpec::new(
            vec![BiomarkerSpec {
                name: "y".into(),
                fixed: vec![INTERCEPT.into(), TIME.into()],
                random: vec![INTERCEPT.into(), TIME.into()],
            }],
            vec!["x1".into()],
        )
        .unwrap()
    }

    fn subject(counts: &[u64], t: f64, event: bool) -> SubjectData {
        SubjectData {
            id: "s".into(),
            records: counts
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let time = 0.3 * j as f64;
                    LongitudinalRecord {
                        time,
                        count: c,
                        biomarker: 0,
                        fixed_covariates: vec![1.0, time],
                        random_design: vec![1.0, time],
                    }
                })
                .collect(),
            observed_time: t,
            event,
            survival_covariates: vec![1.0],
        }
    }

    fn fx() -> FixedEffects {
        FixedEffects {
            beta: vec![vec![2.5, -0.2]],
            psi: vec![-0.37],
            gamma: vec![0.68, 0.17],
            gamma0: -0.68,
            alpha: -0.65,
        }
    }

    #[test]
    fn poisson_examples() {
        assert!((poisson_loglik(0, 0.0).unwrap() + 1.0).abs() < 1e-15);
        let v = poisson_loglik(3, 3f64.ln()).unwrap();
        assert!((v - (3.0 * 3f64.ln() - 3.0 - 6f64.ln())).abs() < 1e-12);
        assert!((v + 1.4959).abs() < 1e-4);
        let total: f64 = (0..=50).map(|y| poisson_loglik(y, 2f64.ln()).unwrap().exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(poisson_loglik(1, f64::NAN).is_err());
    }

    #[test]
    fn survival_examples() {
        let mut fx = fx();
        let s = subject(&[], 0.0, false);
        assert_eq!(survival_loglik(&s, &fx, 0.3).unwrap(), 0.0);
        fx.alpha = -1.0;
        fx.gamma0 = 0.0;
        let s = subject(&[], 1.1814, true);
        let v = survival_loglik(&s, &fx, 0.0).unwrap();
        assert!((v + 1.8745).abs() < 1e-4, "{v}");
        let mut shifted = fx.clone();
        shifted.gamma0 += 0.7;
        let w = survival_loglik(&s, &shifted, -0.7).unwrap();
        assert!((v - w).abs() < 1e-12);
    }

    #[test]
    fn conditional_pieces() {
        let re = RandomEffectsSpec::bivariate(0.25, 0.25, -0.05).unwrap();
        let s = subject(&[], 0.5, true);
        let b = RandomEffects::zeros(&[2]);
        let ll = conditional_loglik(&s, &fx(), &re, &b).unwrap();
        assert_eq!(ll.longitudinal, 0.0);
        let expect = -0.5 * (2.0 * LN_2PI + re.log_det_covariance());
        assert!((ll.prior_b - expect).abs() < 1e-12);
        assert_eq!(ll.total, ll.longitudinal + ll.survival + ll.prior_b);

        // term-by-term recomputation on a 3-record subject
        let s = subject(&[11, 14, 9], 0.8, false);
        let b = RandomEffects::new(&[2], vec![0.1, -0.2]).unwrap();
        let ll = conditional_loglik(&s, &fx(), &re, &b).unwrap();
        let f = fx();
        let mut lon = 0.0;
        for (j, &y) in [11u64, 14, 9].iter().enumerate() {
            let t = 0.3 * j as f64;
            let eta: f64 = 2.5 - 0.2 * t + 0.1 - 0.2 * t;
            let lam = eta.exp();
            lon += y as f64 * eta - lam - ln_gamma(y as f64 + 1.0);
        }
        let eta_s = -0.37 + 0.68 * 0.1 + 0.17 * -0.2;
        let cum = (f.gamma0 + eta_s).exp() * ((f.alpha * 0.8).exp() - 1.0) / f.alpha;
        assert!((ll.longitudinal - lon).abs() < 1e-10);
        assert!((ll.survival + cum).abs() < 1e-12);
    }

    #[test]
    fn evaluator_value_matches_conditional() {
        let spec = spec();
        let re = RandomEffectsSpec::bivariate(0.25, 0.25, -0.05).unwrap();
        let s = subject(&[11, 14, 9, 12], 0.7, true);
        let f = SubjectIntegrand::new(&s, &spec, &fx(), &re).unwrap();
        let b = [0.15, -0.1];
        let ll = conditional_loglik(&s, &fx(), &re, &RandomEffects::new(&[2], b.to_vec()).unwrap()).unwrap();
        assert!((f.value(&b).unwrap() - ll.total).abs() < 1e-10);
        let (v, _, _) = f.derivatives(&b).unwrap();
        assert!((v - ll.total).abs() < 1e-10);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let spec = spec();
        let s = subject(&[11, 14, 9, 12], 0.7, true);
        let ev = SubjectEvaluator::new(&s, &spec);
        let b = [0.15, -0.1];
        let theta = fx().to_theta();
        let t = ev.terms(&b, &theta);
        let n = ev.coord_dim();
        let v0: Vec<f64> = b.iter().chain(theta.iter()).copied().collect();
        let f = |v: &[f64]| ev.value(&v[..2], &v[2..]);
        let g = |v: &[f64]| ev.terms(&v[..2], &v[2..]).grad;
        for i in 0..n {
            let h = 1e-6;
            let mut vp = v0.clone();
            vp[i] += h;
            let mut vm = v0.clone();
            vm[i] -= h;
            let fd = (f(&vp) - f(&vm)) / (2.0 * h);
            assert!((fd - t.grad[i]).abs() < 1e-6 * t.grad[i].abs().max(1.0), "grad {i}");
            let gd = (g(&vp) - g(&vm)) / (2.0 * h);
            for j in 0..n {
                assert!(
                    (-gd[j] - t.neg_hess[(j, i)]).abs() < 1e-5 * t.neg_hess[(j, i)].abs().max(1.0),
                    "hess ({j},{i}): {} vs {}",
                    -gd[j],
                    t.neg_hess[(j, i)]
                );
            }
        }
    }

    struct Quadratic {
        center: DVector<f64>,
        prec: DMatrix<f64>,
        c: f64,
    }

    impl LogIntegrand for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn value(&self, b: &[f64]) -> Result<f64> {
            let r = DVector::from_column_slice(b) - &self.center;
            Ok(self.c - 0.5 * r.dot(&(&self.prec * &r)))
        }
        fn derivatives(&self, b: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
            let r = DVector::from_column_slice(b) - &self.center;
            let g = -(&self.prec * &r);
            Ok((self.value(b)?, g, self.prec.clone()))
        }
    }

    #[test]
    fn laplace_and_quadrature_exact_on_gaussians() {
        let q = Quadratic {
            center: DVector::from_vec(vec![0.4, -1.0]),
            prec: DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 1.5]),
            c: -2.0,
        };
        let mode = find_mode(&q, None, &NewtonOptions::default()).unwrap();
        assert!(mode.iterations <= 1);
        let det = 3.0 * 1.5 - 0.25;
        let exact = -2.0 + LN_2PI - 0.5 * f64::ln(det);
        assert!((laplace_from_mode(&mode) - exact).abs() < 1e-12);
        for n in [1, 2, 7] {
            let v = adaptive_gauss_hermite_from_mode(&q, &mode, n).unwrap();
            assert!((v - exact).abs() < 1e-12, "{n}: {v} vs {exact}");
        }
    }

    #[test]
    fn empty_subject_integrates_prior_to_one() {
        let spec = spec();
        let re = RandomEffectsSpec::bivariate(0.4, 0.3, 0.2).unwrap();
        let s = subject(&[], 0.0, false);
        for m in [Method::Laplace, Method::Quadrature(5)] {
            let v = marginal_loglik_subject(&s, &spec, &fx(), &re, m).unwrap();
            assert!(v.abs() < 1e-12, "{m:?}: {v}");
        }
    }

    #[test]
    fn analytic_hessian_matches_debug_path() {
        let spec = spec();
        let re = RandomEffectsSpec::bivariate(0.25, 0.25, -0.05).unwrap();
        let s = subject(&[11, 14, 9, 12], 0.7, true);
        let f = SubjectIntegrand::new(&s, &spec, &fx(), &re).unwrap();
        let b = [0.05, 0.1];
        let (_, _, h) = f.derivatives(&b).unwrap();
        let fd = finite_difference_neg_hessian(&f, &b).unwrap();
        assert!((h - fd).amax() < 1e-6);
    }

    #[test]
    fn laplace_close_to_quadrature() {
        let spec = spec();
        let re = RandomEffectsSpec::bivariate(0.25, 0.25, -0.05).unwrap();
        let s = subject(&[11, 14, 9, 12], 0.7, true);
        let lap = marginal_loglik_subject(&s, &spec, &fx(), &re, Method::Laplace).unwrap();
        let quad = marginal_loglik_subject(&s, &spec, &fx(), &re, Method::Quadrature(15)).unwrap();
        assert!((lap - quad).abs() < 1e-3);
    }

    #[test]
    fn marginal_gradient_matches_finite_differences() {
        let spec = spec();
        let re = RandomEffectsSpec::bivariate(0.25, 0.25, -0.05).unwrap();
        let s = subject(&[11, 14, 9, 12], 0.7, true);
        let mut f0 = fx();
        f0.gamma = vec![1.1, -0.6];
        let (_, g) = marginal_loglik_subject_gradient(&s, &spec, &f0, &re).unwrap();
        let theta = f0.to_theta();
        for j in 0..theta.len() {
            let h = 1e-5 * theta[j].abs().max(1.0);
            let mut tp = theta.clone();
            tp[j] += h;
            let mut tm = theta.clone();
            tm[j] -= h;
            let fp = FixedEffects::from_theta(&spec, &tp).unwrap();
            let fm = FixedEffects::from_theta(&spec, &tm).unwrap();
            let vp = marginal_loglik_subject(&s, &spec, &fp, &re, Method::Laplace).unwrap();
            let vm = marginal_loglik_subject(&s, &spec, &fm, &re, Method::Laplace).unwrap();
            let fd = (vp - vm) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-5 * g[j].abs().max(1.0), "coord {j}: fd {fd} vs {}", g[j]);
        }
    }
}
