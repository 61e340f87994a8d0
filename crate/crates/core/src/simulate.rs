//! Synthetic cohorts: covariates, correlated random effects, Poisson counts on
//! a fixed visit schedule and cure-aware event times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gompertz::{self, GompertzParams};
use crate::model::{
    self, BiomarkerSpec, FixedEffects, JointModelSpec, LongitudinalRecord, RandomEffects,
    RandomEffectsSpec, SubjectData, INTERCEPT, TIME,
};

pub const DEFAULT_VISITS: [f64; 4] = [0.0, 0.3, 0.6, 0.9];

/// Generator settings for one simulated cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub visit_times: Vec<f64>,
    /// Layout of [`simulation_spec`]: `beta = [b0, time, x1, x2]`, `psi = [x1]`.
    pub fixed: FixedEffects,
    pub sigma: [f64; 2],
    pub rho: f64,
    /// Success probability of the binary covariate `x1`.
    pub x1_prob: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// High-censoring scenario.
    pub fn scenario1(n: usize, seed: u64) -> Self {
        Self {
            n,
            visit_times: DEFAULT_VISITS.to_vec(),
            fixed: FixedEffects {
                beta: vec![vec![2.5, -0.2, -0.01, 0.1]],
                psi: vec![-0.37],
                gamma: vec![0.68, 0.17],
                gamma0: -0.68,
                alpha: -0.65,
            },
            sigma: [0.25, 0.25],
            rho: -0.05,
            x1_prob: 0.8,
            seed,
        }
    }

    /// Low-censoring scenario.
    pub fn scenario2(n: usize, seed: u64) -> Self {
        Self {
            n,
            visit_times: DEFAULT_VISITS.to_vec(),
            fixed: FixedEffects {
                beta: vec![vec![1.0, -1.0, -0.1, 0.5]],
                psi: vec![0.5],
                gamma: vec![1.0, 1.0],
                gamma0: 0.8,
                alpha: -1.0,
            },
            sigma: [0.5, 0.5],
            rho: 0.4,
            x1_prob: 0.8,
            seed,
        }
    }

    pub fn by_id(scenario: u32, n: usize, seed: u64) -> Result<Self> {
        match scenario {
            1 => Ok(Self::scenario1(n, seed)),
            2 => Ok(Self::scenario2(n, seed)),
            s => Err(Error::Config(format!("unknown scenario {s} (expected 1 or 2)"))),
        }
    }

    pub fn random_effects(&self) -> Result<RandomEffectsSpec> {
        RandomEffectsSpec::bivariate(self.sigma[0], self.sigma[1], self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("scenario needs n >= 1".into()));
        }
        if self.visit_times.is_empty() || self.visit_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("visit times must be nonempty and strictly increasing".into()));
        }
        if self.visit_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Config("visit times must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.x1_prob) {
            return Err(Error::Config("x1 probability must lie in [0, 1]".into()));
        }
        self.fixed.validate(&simulation_spec())?;
        self.random_effects()?;
        Ok(())
    }

    /// The 12 true values in the order of [`truth_names`].
    pub fn truth(&self) -> Vec<f64> {
        let f = &self.fixed;
        let mut v = vec![f.alpha, f.gamma0, f.gamma[0], f.gamma[1], f.psi[0]];
        v.extend(&f.beta[0]);
        v.extend([self.sigma[0], self.sigma[1], self.rho]);
        v
    }
}

/// Names of the simulation-study parameters, in report order.
pub fn truth_names() -> Vec<String> {
    [
        "alpha", "gamma0", "gamma_01", "gamma_11", "psi_1", "beta_0", "beta_1", "beta_2", "beta_3",
        "sigma_b0", "sigma_b1", "rho",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Name of each [`truth_names`] entry in a fit of [`simulation_spec`].
pub fn fitted_names() -> Vec<String> {
    [
        "alpha",
        "gamma0",
        "gamma_y_intercept",
        "gamma_y_time",
        "psi_x1",
        "beta_y_intercept",
        "beta_y_time",
        "beta_y_x1",
        "beta_y_x2",
        "sigma_y_intercept",
        "sigma_y_time",
        "rho_y_intercept_y_time",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Model layout used by the simulator: one biomarker `y` with fixed effects
/// `(intercept, time, x1, x2)`, random intercept and slope, and `x1` in the
/// hazard.
pub fn simulation_spec() -> JointModelSpec {
    JointModelSpec::new(
        vec![BiomarkerSpec {
            name: "y".into(),
            fixed: vec![INTERCEPT.into(), TIME.into(), "x1".into(), "x2".into()],
            random: vec![INTERCEPT.into(), TIME.into()],
        }],
        vec!["x1".into()],
    )
    .expect("static simulation layout is valid")
}

/// Seeded generator for replicate `stream` of a study.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Latent quantities kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTruth {
    pub random_effects: Vec<f64>,
    /// `M_i`: false for cured subjects.
    pub susceptible: bool,
    pub cure_probability: f64,
    /// Event time before censoring; `None` for cured subjects.
    pub event_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub subjects: Vec<SubjectData>,
    pub latent: Vec<LatentTruth>,
    pub censoring_rate: f64,
    /// Upper limit of the censoring law.
    pub censoring_bound: f64,
}

impl SimulatedDataset {
    pub fn mean_cure_probability(&self) -> f64 {
        self.latent.iter().map(|l| l.cure_probability).sum::<f64>() / self.latent.len() as f64
    }
}

pub fn draw_random_effects(spec: &RandomEffectsSpec, rng: &mut impl Rng) -> RandomEffects {
    let z: Vec<f64> = (0..spec.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let l = spec.cholesky_factor();
    let b = &l * nalgebra::DVector::from_vec(z);
    RandomEffects::new(spec.dims(), b.as_slice().to_vec()).expect("dimension follows the spec")
}

/// Counts at each visit for a subject with covariates `(x1, x2)`.
pub fn simulate_longitudinal(
    x1: f64,
    x2: f64,
    b: &RandomEffects,
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Result<Vec<LongitudinalRecord>> {
    let mut out = Vec::with_capacity(cfg.visit_times.len());
    for &t in &cfg.visit_times {
        let mut rec = LongitudinalRecord {
            time: t,
            count: 0,
            biomarker: 0,
            fixed_covariates: vec![1.0, t, x1, x2],
            random_design: vec![1.0, t],
        };
        let eta = model::longitudinal_linear_predictor(&rec, &cfg.fixed, b)?;
        rec.count = draw_poisson(eta.exp(), rng)?;
        out.push(rec);
    }
    Ok(out)
}

fn draw_poisson(lambda: f64, rng: &mut impl Rng) -> Result<u64> {
    if lambda == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda).map_err(|e| Error::invalid(format!("Poisson mean {lambda}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Cure probability, cure indicator and (for susceptibles) the uncensored
/// event time of one subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentEvent {
    pub cure_probability: f64,
    pub susceptible: bool,
    pub time: Option<f64>,
}

pub fn draw_latent_event(fx: &FixedEffects, eta_s: f64, rng: &mut impl Rng) -> Result<LatentEvent> {
    let p = model::subject_cure_fraction(fx, eta_s);
    let susceptible = rng.random::<f64>() < 1.0 - p;
    let time = if susceptible {
        let u = (1.0 - p) * rng.random::<f64>();
        let base = GompertzParams::from_log_rate(fx.alpha, fx.gamma0)?;
        Some(gompertz::susceptible_quantile(u, &base, eta_s)?)
    } else {
        None
    };
    Ok(LatentEvent {
        cure_probability: p,
        susceptible,
        time,
    })
}

/// Administrative censoring `u* ~ U(0, bound)`; returns the observed time and
/// the event indicator.
pub fn censor(time: Option<f64>, bound: f64, rng: &mut impl Rng) -> (f64, bool) {
    let c = bound * rng.random::<f64>();
    match time {
        Some(t) if t < c => (t, true),
        _ => (c, false),
    }
}

/// Single-subject version of the five-step sampler with a known censoring
/// bound.
pub fn simulate_event_time(
    fx: &FixedEffects,
    eta_s: f64,
    rng: &mut impl Rng,
    bound: f64,
) -> Result<(f64, bool)> {
    let ev = draw_latent_event(fx, eta_s, rng)?;
    Ok(censor(ev.time, bound, rng))
}

pub fn simulate_dataset(cfg: &ScenarioConfig) -> Result<SimulatedDataset> {
    simulate_dataset_with(cfg, &mut rng_for(cfg.seed, 0))
}

/// Two passes: subjects and latent event times first, then censoring against
/// the cohort maximum of the finite event times.
pub fn simulate_dataset_with(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let re = cfg.random_effects()?;
    let mut subjects = Vec::with_capacity(cfg.n);
    let mut latent = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let x1 = if rng.random::<f64>() < cfg.x1_prob { 1.0 } else { 0.0 };
        let x2: f64 = rng.random();
        let b = draw_random_effects(&re, rng);
        let records = simulate_longitudinal(x1, x2, &b, cfg, rng)?;
        let eta_s = model::survival_linear_predictor(&[x1], &cfg.fixed, &b)?;
        let ev = draw_latent_event(&cfg.fixed, eta_s, rng)?;
        subjects.push(SubjectData {
            id: format!("{}", i + 1),
            records,
            observed_time: 0.0,
            event: false,
            survival_covariates: vec![x1],
        });
        latent.push(LatentTruth {
            random_effects: b.values().to_vec(),
            susceptible: ev.susceptible,
            cure_probability: ev.cure_probability,
            event_time: ev.time,
        });
    }
    let max_t = latent
        .iter()
        .filter_map(|l| l.event_time)
        .fold(f64::NEG_INFINITY, f64::max);
    // with no finite event time the bound falls back to the end of the visit window
    let bound = if max_t.is_finite() {
        max_t
    } else {
        *cfg.visit_times.last().expect("validated nonempty")
    };
    let mut censored = 0usize;
    for (s, l) in subjects.iter_mut().zip(&latent) {
        let (t, event) = censor(l.event_time, bound, rng);
        s.observed_time = t;
        s.event = event;
        censored += usize::from(!event);
    }
    Ok(SimulatedDataset {
        censoring_rate: censored as f64 / cfg.n as f64,
        censoring_bound: bound,
        subjects,
        latent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_sigma_rejected() {
        assert!(RandomEffectsSpec::bivariate(0.0, 1e-3, 0.0).is_err());
    }

    #[test]
    fn random_effect_covariance() {
        let re = RandomEffectsSpec::bivariate(0.25, 0.25, -0.05).unwrap();
        let mut rng = rng_for(11, 0);
        let n = 100_000;
        let mut s = [[0.0; 2]; 2];
        for _ in 0..n {
            let b = draw_random_effects(&re, &mut rng);
            let v = b.values();
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] += v[i] * v[j] / n as f64;
                }
            }
        }
        let cov = re.covariance();
        for i in 0..2 {
            for j in 0..2 {
                assert!((s[i][j] - cov[(i, j)]).abs() < 0.01);
            }
        }

        let re = RandomEffectsSpec::bivariate(1.0, 2.0, 0.0).unwrap();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let b = draw_random_effects(&re, &mut rng);
            let v = b.values();
            sxy += v[0] * v[1];
            sxx += v[0] * v[0];
            syy += v[1] * v[1];
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn poisson_means() {
        let mut rng = rng_for(5, 0);
        let n = 100_000;
        let m: f64 = (0..n).map(|_| draw_poisson(1.0, &mut rng).unwrap() as f64).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.01);

        let cfg = ScenarioConfig::scenario1(1, 0);
        let b = RandomEffects::zeros(&[2]);
        let lambda = (2.5f64 - 0.01 + 0.05).exp();
        assert!((lambda - 12.68).abs() < 0.01);
        let mut total = 0.0;
        let reps = 20_000;
        for _ in 0..reps {
            let recs = simulate_longitudinal(1.0, 0.5, &b, &cfg, &mut rng).unwrap();
            total += recs[0].count as f64;
        }
        assert!((total / reps as f64 / lambda - 1.0).abs() < 0.01);
    }

    #[test]
    fn cured_subject_is_censored() {
        let fx = ScenarioConfig::scenario1(1, 0).fixed;
        let mut rng = rng_for(1, 0);
        for _ in 0..100 {
            let (_, event) = simulate_event_time(&fx, -50.0, &mut rng, 1.0).unwrap();
            assert!(!event);
        }
    }

    #[test]
    fn forced_cure_single_subject() {
        let mut cfg = ScenarioConfig::scenario1(1, 3);
        cfg.fixed.gamma0 = -60.0;
        let ds = simulate_dataset(&cfg).unwrap();
        assert_eq!(ds.subjects.len(), 1);
        assert!(!ds.subjects[0].event);
        assert!(!ds.latent[0].susceptible);
        assert_eq!(ds.censoring_rate, 1.0);
    }

    #[test]
    fn deterministic() {
        let cfg = ScenarioConfig::scenario2(50, 99);
        let a = simulate_dataset(&cfg).unwrap();
        let b = simulate_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_dataset(&ScenarioConfig::scenario2(50, 100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn censoring_rates() {
        let d1 = simulate_dataset(&ScenarioConfig::scenario1(1000, 1)).unwrap();
        assert!(d1.censoring_rate > 0.5 && d1.censoring_rate < 0.7, "{}", d1.censoring_rate);
        let d2 = simulate_dataset(&ScenarioConfig::scenario2(1000, 1)).unwrap();
        assert!(d2.censoring_rate > 0.1 && d2.censoring_rate < 0.3, "{}", d2.censoring_rate);
        for (s, l) in d1.subjects.iter().zip(&d1.latent) {
            assert!(l.susceptible || !s.event);
        }
    }

    #[test]
    fn cure_indicator_matches_probabilities() {
        let ds = simulate_dataset(&ScenarioConfig::scenario1(5000, 2)).unwrap();
        let n = ds.latent.len() as f64;
        let p_bar = ds.mean_cure_probability();
        let cured = ds.latent.iter().filter(|l| !l.susceptible).count() as f64 / n;
        let var: f64 = ds.latent.iter().map(|l| l.cure_probability * (1.0 - l.cure_probability)).sum::<f64>() / (n * n);
        assert!((cured - p_bar).abs() < 3.0 * var.sqrt());
    }

    #[test]
    fn susceptible_times_follow_conditional_law() {
        // fixed linear predictor so the susceptible CDF is a single function
        let fx = ScenarioConfig::scenario1(1, 0).fixed;
        let eta = 0.2;
        let base = GompertzParams::from_log_rate(fx.alpha, fx.gamma0).unwrap();
        let law = base.with_linear_predictor(eta).unwrap();
        let mass = 1.0 - gompertz::cure_fraction(&law);
        let mut rng = rng_for(8, 0);
        let mut t = Vec::new();
        while t.len() < 5000 {
            if let Some(x) = draw_latent_event(&fx, eta, &mut rng).unwrap().time {
                t.push(x);
            }
        }
        t.sort_by(f64::total_cmp);
        let n = t.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, x) in t.iter().enumerate() {
            let f = (1.0 - gompertz::survival(*x, &law).unwrap()) / mass;
            ks = ks.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
        }
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn truth_vector_layout() {
        let c = ScenarioConfig::scenario1(1, 0);
        let t = c.truth();
        assert_eq!(t.len(), truth_names().len());
        assert_eq!(t, vec![-0.65, -0.68, 0.68, 0.17, -0.37, 2.5, -0.2, -0.01, 0.1, 0.25, 0.25, -0.05]);
    }
}
