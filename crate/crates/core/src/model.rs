//! Joint-model data structures and deterministic evaluators.
//!
//! Each biomarker `k` has a Poisson sub-model with
//! `log lambda = x' beta_k + z' b_k`; the hazard of subject `i` is
//! `exp(alpha t + gamma0 + w' psi + sum_k b_k' gamma_k)`.
//!
//! Random effects live in one flat vector per subject, biomarker-major, in the
//! order the random-design columns are declared for each biomarker
//! (typically intercept then slope). The association vector `gamma` uses the
//! same layout.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gompertz::{self, GompertzParams};

/// Design column name that expands to a constant 1.
pub const INTERCEPT: &str = "intercept";
/// Design column name that expands to the visit time.
pub const TIME: &str = "time";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiomarkerSpec {
    pub name: String,
    /// Fixed-effect design columns (`x`).
    pub fixed: Vec<String>,
    /// Random-effect design columns (`z`).
    pub random: Vec<String>,
}

/// Dimensions and coefficient layout of one joint model.
///
/// The fixed-effect vector `theta` is laid out as
/// `[beta_1, .., beta_K, psi, gamma, gamma0, alpha]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModelSpec {
    biomarkers: Vec<BiomarkerSpec>,
    survival: Vec<String>,
    re_offsets: Vec<usize>,
    beta_offsets: Vec<usize>,
    re_dim: usize,
    psi_offset: usize,
    gamma_offset: usize,
}

impl JointModelSpec {
    pub fn new(biomarkers: Vec<BiomarkerSpec>, survival: Vec<String>) -> Result<Self> {
        if biomarkers.is_empty() {
            return Err(Error::Config("at least one biomarker is required".into()));
        }
        for (k, bm) in biomarkers.iter().enumerate() {
            if bm.fixed.is_empty() {
                return Err(Error::Config(format!("biomarker {k} ('{}') has no fixed effects", bm.name)));
            }
            if bm.random.is_empty() {
                return Err(Error::Config(format!(
                    "biomarker {k} ('{}') has no random effects to share with the hazard",
                    bm.name
                )));
            }
            if biomarkers[..k].iter().any(|o| o.name == bm.name) {
                return Err(Error::Config(format!("duplicate biomarker name '{}'", bm.name)));
            }
        }
        if survival.iter().any(|c| c == INTERCEPT) {
            return Err(Error::Config(
                "survival design must not contain an intercept: gamma0 already plays that role".into(),
            ));
        }
        let mut re_offsets = Vec::with_capacity(biomarkers.len());
        let mut beta_offsets = Vec::with_capacity(biomarkers.len());
        let (mut re, mut beta) = (0, 0);
        for bm in &biomarkers {
            re_offsets.push(re);
            beta_offsets.push(beta);
            re += bm.random.len();
            beta += bm.fixed.len();
        }
        let psi_offset = beta;
        let gamma_offset = psi_offset + survival.len();
        Ok(Self {
            biomarkers,
            survival,
            re_offsets,
            beta_offsets,
            re_dim: re,
            psi_offset,
            gamma_offset,
        })
    }

    pub fn biomarkers(&self) -> &[BiomarkerSpec] {
        &self.biomarkers
    }

    pub fn n_biomarkers(&self) -> usize {
        self.biomarkers.len()
    }

    pub fn survival_covariates(&self) -> &[String] {
        &self.survival
    }

    pub fn fixed_dim(&self, k: usize) -> usize {
        self.biomarkers[k].fixed.len()
    }

    pub fn random_dim(&self, k: usize) -> usize {
        self.biomarkers[k].random.len()
    }

    pub fn random_dims(&self) -> Vec<usize> {
        self.biomarkers.iter().map(|b| b.random.len()).collect()
    }

    /// Total random-effect dimension per subject.
    pub fn re_dim(&self) -> usize {
        self.re_dim
    }

    pub fn re_offset(&self, k: usize) -> usize {
        self.re_offsets[k]
    }

    pub fn beta_offset(&self, k: usize) -> usize {
        self.beta_offsets[k]
    }

    pub fn psi_offset(&self) -> usize {
        self.psi_offset
    }

    pub fn gamma_offset(&self) -> usize {
        self.gamma_offset
    }

    pub fn gamma0_index(&self) -> usize {
        self.gamma_offset + self.re_dim
    }

    pub fn alpha_index(&self) -> usize {
        self.gamma0_index() + 1
    }

    /// Length of the full fixed-effect vector, `alpha` included.
    pub fn theta_dim(&self) -> usize {
        self.alpha_index() + 1
    }

    /// Names of the random-effect coordinates, e.g. `anxiety_intercept`.
    pub fn random_effect_names(&self) -> Vec<String> {
        self.biomarkers
            .iter()
            .flat_map(|b| b.random.iter().map(move |r| format!("{}_{}", b.name, r)))
            .collect()
    }

    /// Names of the `theta` coordinates in layout order.
    pub fn theta_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.theta_dim());
        for b in &self.biomarkers {
            names.extend(b.fixed.iter().map(|c| format!("beta_{}_{}", b.name, c)));
        }
        names.extend(self.survival.iter().map(|c| format!("psi_{c}")));
        names.extend(self.random_effect_names().iter().map(|r| format!("gamma_{r}")));
        names.push("gamma0".into());
        names.push("alpha".into());
        names
    }

    /// Index pairs `(i, j)`, `i < j`, in the order correlations are stored.
    pub fn correlation_pairs(&self) -> Vec<(usize, usize)> {
        correlation_pairs(self.re_dim)
    }
}

pub(crate) fn correlation_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            pairs.push((i, j));
        }
    }
    pairs
}

/// One Poisson count.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalRecord {
    pub time: f64,
    pub count: u64,
    /// Zero-based biomarker index.
    pub biomarker: usize,
    pub fixed_covariates: Vec<f64>,
    pub random_design: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectData {
    pub id: String,
    pub records: Vec<LongitudinalRecord>,
    pub observed_time: f64,
    pub event: bool,
    pub survival_covariates: Vec<f64>,
}

impl SubjectData {
    pub fn validate(&self, spec: &JointModelSpec) -> Result<()> {
        let ctx = |what: &str| format!("subject {} {what}", self.id);
        if !(self.observed_time.is_finite() && self.observed_time >= 0.0) {
            return Err(Error::invalid(ctx(&format!(
                "observed time must be finite and >= 0, got {}",
                self.observed_time
            ))));
        }
        if self.survival_covariates.len() != spec.survival.len() {
            return Err(Error::DimensionMismatch {
                context: ctx("survival covariates"),
                expected: spec.survival.len(),
                got: self.survival_covariates.len(),
            });
        }
        for rec in &self.records {
            if rec.biomarker >= spec.n_biomarkers() {
                return Err(Error::invalid(ctx(&format!("has unknown biomarker index {}", rec.biomarker))));
            }
            if !(rec.time.is_finite() && rec.time >= 0.0) {
                return Err(Error::invalid(ctx(&format!("has invalid record time {}", rec.time))));
            }
            if rec.fixed_covariates.len() != spec.fixed_dim(rec.biomarker) {
                return Err(Error::DimensionMismatch {
                    context: ctx("fixed design"),
                    expected: spec.fixed_dim(rec.biomarker),
                    got: rec.fixed_covariates.len(),
                });
            }
            if rec.random_design.len() != spec.random_dim(rec.biomarker) {
                return Err(Error::DimensionMismatch {
                    context: ctx("random design"),
                    expected: spec.random_dim(rec.biomarker),
                    got: rec.random_design.len(),
                });
            }
        }
        Ok(())
    }
}

/// Fixed effects of the joint model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffects {
    /// One coefficient vector per biomarker.
    pub beta: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
    /// Association coefficients, flat, aligned with the random-effect layout.
    pub gamma: Vec<f64>,
    pub gamma0: f64,
    pub alpha: f64,
}

impl FixedEffects {
    pub fn zeros(spec: &JointModelSpec) -> Self {
        Self {
            beta: (0..spec.n_biomarkers()).map(|k| vec![0.0; spec.fixed_dim(k)]).collect(),
            psi: vec![0.0; spec.survival.len()],
            gamma: vec![0.0; spec.re_dim()],
            gamma0: 0.0,
            alpha: 0.0,
        }
    }

    pub fn validate(&self, spec: &JointModelSpec) -> Result<()> {
        let mismatch = |context: &str, expected, got| Error::DimensionMismatch {
            context: context.into(),
            expected,
            got,
        };
        if self.beta.len() != spec.n_biomarkers() {
            return Err(mismatch("beta blocks", spec.n_biomarkers(), self.beta.len()));
        }
        for (k, b) in self.beta.iter().enumerate() {
            if b.len() != spec.fixed_dim(k) {
                return Err(mismatch("beta", spec.fixed_dim(k), b.len()));
            }
        }
        if self.psi.len() != spec.survival.len() {
            return Err(mismatch("psi", spec.survival.len(), self.psi.len()));
        }
        if self.gamma.len() != spec.re_dim() {
            return Err(mismatch("gamma", spec.re_dim(), self.gamma.len()));
        }
        if !self.to_theta().iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("fixed effects must be finite"));
        }
        Ok(())
    }

    /// Association coefficients of biomarker `k`.
    pub fn gamma_assoc<'a>(&'a self, spec: &JointModelSpec, k: usize) -> &'a [f64] {
        let o = spec.re_offset(k);
        &self.gamma[o..o + spec.random_dim(k)]
    }

    pub fn to_theta(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.beta.iter().flatten().copied().collect();
        v.extend_from_slice(&self.psi);
        v.extend_from_slice(&self.gamma);
        v.push(self.gamma0);
        v.push(self.alpha);
        v
    }

    pub fn from_theta(spec: &JointModelSpec, theta: &[f64]) -> Result<Self> {
        if theta.len() != spec.theta_dim() {
            return Err(Error::DimensionMismatch {
                context: "theta".into(),
                expected: spec.theta_dim(),
                got: theta.len(),
            });
        }
        let beta = (0..spec.n_biomarkers())
            .map(|k| {
                let o = spec.beta_offset(k);
                theta[o..o + spec.fixed_dim(k)].to_vec()
            })
            .collect();
        Ok(Self {
            beta,
            psi: theta[spec.psi_offset()..spec.gamma_offset()].to_vec(),
            gamma: theta[spec.gamma_offset()..spec.gamma0_index()].to_vec(),
            gamma0: theta[spec.gamma0_index()],
            alpha: theta[spec.alpha_index()],
        })
    }

    /// Baseline Gompertz law, `mu = exp(gamma0)`.
    pub fn baseline(&self) -> Result<GompertzParams> {
        GompertzParams::from_log_rate(self.alpha, self.gamma0)
    }
}

/// Covariance of the shared random effects, parameterized by standard
/// deviations and correlations.
#[derive(Debug, Clone)]
pub struct RandomEffectsSpec {
    dims: Vec<usize>,
    sigma: Vec<f64>,
    corr: Vec<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl RandomEffectsSpec {
    /// `corr` holds the correlations of the pairs `(i, j)`, `i < j`, in
    /// row-major upper-triangle order.
    pub fn new(dims: Vec<usize>, sigma: Vec<f64>, corr: Vec<f64>) -> Result<Self> {
        let d: usize = dims.iter().sum();
        if sigma.len() != d {
            return Err(Error::DimensionMismatch {
                context: "random-effect standard deviations".into(),
                expected: d,
                got: sigma.len(),
            });
        }
        let pairs = correlation_pairs(d);
        if corr.len() != pairs.len() {
            return Err(Error::DimensionMismatch {
                context: "random-effect correlations".into(),
                expected: pairs.len(),
                got: corr.len(),
            });
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid(format!("random-effect SD must be > 0, got {s}")));
        }
        if let Some(r) = corr.iter().find(|r| !(r.is_finite() && r.abs() < 1.0)) {
            return Err(Error::invalid(format!("correlation must lie in (-1, 1), got {r}")));
        }
        let mut cov = DMatrix::from_diagonal(&DVector::from_iterator(d, sigma.iter().map(|s| s * s)));
        for (&(i, j), r) in pairs.iter().zip(&corr) {
            let c = r * sigma[i] * sigma[j];
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("random-effect covariance".into()))?;
        Ok(Self {
            dims,
            sigma,
            corr,
            cov,
            chol,
        })
    }

    /// Single-biomarker spec with intercept and slope.
    pub fn bivariate(sigma0: f64, sigma1: f64, rho: f64) -> Result<Self> {
        Self::new(vec![2], vec![sigma0, sigma1], vec![rho])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn correlations(&self) -> &[f64] {
        &self.corr
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn precision(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn log_det_covariance(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `log N(b; 0, Sigma)`.
    pub fn log_density(&self, b: &[f64]) -> f64 {
        let v = DVector::from_column_slice(b);
        let sol = self.chol.solve(&v);
        let d = self.dim() as f64;
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det_covariance() + v.dot(&sol))
    }
}

/// Subject-specific random effects `b_i`, partitioned by biomarker.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomEffects {
    values: Vec<f64>,
    offsets: Vec<usize>,
}

impl RandomEffects {
    pub fn new(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        let d: usize = dims.iter().sum();
        if values.len() != d {
            return Err(Error::DimensionMismatch {
                context: "random effects".into(),
                expected: d,
                got: values.len(),
            });
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut o = 0;
        for &k in dims {
            offsets.push(o);
            o += k;
        }
        offsets.push(o);
        Ok(Self { values, offsets })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let d = dims.iter().sum();
        Self::new(dims, vec![0.0; d]).expect("dimensions agree by construction")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn biomarker(&self, k: usize) -> &[f64] {
        &self.values[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn n_biomarkers(&self) -> usize {
        self.offsets.len() - 1
    }
}

fn dot(a: &[f64], b: &[f64], context: &str) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: context.into(),
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// `x' beta_k + z' b_k`, the log of the Poisson mean.
pub fn longitudinal_linear_predictor(
    rec: &LongitudinalRecord,
    fx: &FixedEffects,
    b: &RandomEffects,
) -> Result<f64> {
    let k = rec.biomarker;
    if k >= fx.beta.len() || k >= b.n_biomarkers() {
        return Err(Error::invalid(format!("biomarker index {k} out of range")));
    }
    Ok(dot(&rec.fixed_covariates, &fx.beta[k], "fixed design")?
        + dot(&rec.random_design, b.biomarker(k), "random design")?)
}

/// `w' psi + sum_k b_k' gamma_k`.
pub fn survival_linear_predictor(w: &[f64], fx: &FixedEffects, b: &RandomEffects) -> Result<f64> {
    Ok(dot(w, &fx.psi, "survival covariates")? + dot(b.values(), &fx.gamma, "association")?)
}

fn subject_law(fx: &FixedEffects, eta_s: f64) -> Result<GompertzParams> {
    GompertzParams::from_log_rate(fx.alpha, fx.gamma0 + eta_s)
}

/// `exp(alpha t + gamma0 + eta_s)`.
pub fn subject_hazard(t: f64, fx: &FixedEffects, eta_s: f64) -> Result<f64> {
    gompertz::hazard(t, &subject_law(fx, eta_s)?)
}

/// `exp(gamma0 + eta_s) (exp(alpha t) - 1) / alpha`.
pub fn subject_cumulative_hazard(t: f64, fx: &FixedEffects, eta_s: f64) -> Result<f64> {
    gompertz::cumulative_hazard(t, &subject_law(fx, eta_s)?)
}

pub fn subject_survival(t: f64, fx: &FixedEffects, eta_s: f64) -> Result<f64> {
    gompertz::survival(t, &subject_law(fx, eta_s)?)
}

/// Subject-level cure probability `exp(exp(gamma0 + eta_s) / alpha)`, zero
/// when `alpha >= 0`.
pub fn subject_cure_fraction(fx: &FixedEffects, eta_s: f64) -> f64 {
    cure_probability(fx.alpha, fx.gamma0 + eta_s)
}

/// Cure probability for shape `alpha` and total log-rate `log_rate`.
pub fn cure_probability(alpha: f64, log_rate: f64) -> f64 {
    if alpha < 0.0 {
        (log_rate.min(gompertz::LOG_CLAMP).exp() / alpha).exp()
    } else {
        0.0
    }
}
