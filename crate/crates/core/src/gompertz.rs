//! The Gompertz distribution with hazard `mu * exp(alpha * t)`.
//!
//! For `alpha < 0` the distribution is defective: the survival function
//! levels off at `exp(mu / alpha)`, the cured proportion. `alpha = 0` is the
//! exponential limit and `alpha > 0` is the ordinary (proper) Gompertz law.
//!
//! Everything here is written in terms of the integrated exponential
//! `G(alpha, t) = (exp(alpha * t) - 1) / alpha`, so the cumulative hazard is
//! `mu * G`. `G` and its `alpha`-derivatives are evaluated by series near
//! `alpha * t = 0` and in log space elsewhere.

use crate::error::{Error, Result};

/// Exponents are capped here before calling `exp`.
pub const LOG_CLAMP: f64 = 700.0;

/// Below this `|alpha|` the exponential-limit formulas are used directly.
pub const ALPHA_ZERO_TOL: f64 = 1e-10;

const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GompertzParams {
    alpha: f64,
    mu: f64,
}

impl GompertzParams {
    pub fn new(alpha: f64, mu: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be finite, got {alpha}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(format!("mu must be finite and > 0, got {mu}")));
        }
        Ok(Self { alpha, mu })
    }

    /// Parameters with `mu = exp(gamma0)`.
    pub fn from_log_rate(alpha: f64, gamma0: f64) -> Result<Self> {
        Self::new(alpha, gamma0.exp())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma0(&self) -> f64 {
        self.mu.ln()
    }

    /// The same shape with the rate multiplied by `exp(eta)`.
    pub fn with_linear_predictor(&self, eta: f64) -> Result<Self> {
        Self::new(self.alpha, (self.mu.ln() + eta).exp())
    }

    pub fn is_defective(&self) -> bool {
        self.alpha < 0.0
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be finite and >= 0, got {t}")))
    }
}

/// `phi_k(x) = integral_0^1 u^k exp(x u) du` by its Taylor series.
fn phi_series(k: u32, x: f64) -> f64 {
    let mut term = 1.0; // x^n / n!
    let mut sum = 0.0;
    for n in 0..SERIES_TERMS {
        sum += term / (n as f64 + k as f64 + 1.0);
        term *= x / (n as f64 + 1.0);
    }
    sum
}

/// `log phi_0(x)` where `phi_0(x) = expm1(x) / x`.
fn log_phi0(x: f64) -> f64 {
    if x.abs() < SERIES_RADIUS {
        phi_series(0, x).ln()
    } else if x > 0.0 {
        x + (-(-x).exp_m1()).ln() - x.ln()
    } else {
        (-x.exp_m1()).ln() - (-x).ln()
    }
}

/// `(phi_1 / phi_0, phi_2 / phi_0)` evaluated without overflow.
fn phi_ratios(x: f64) -> (f64, f64) {
    if x.abs() < SERIES_RADIUS {
        let p0 = phi_series(0, x);
        (phi_series(1, x) / p0, phi_series(2, x) / p0)
    } else if x > 0.0 {
        let em = (-x).exp();
        let denom = 1.0 - em;
        let r1 = ((x - 1.0) + em) / (x * denom);
        let r2 = (x * x - 2.0 * x + 2.0 - 2.0 * em) / (x * x * denom);
        (r1, r2)
    } else {
        let ex = x.exp();
        let em1 = x.exp_m1();
        let r1 = (ex * (x - 1.0) + 1.0) / (x * em1);
        let r2 = (ex * (x * x - 2.0 * x + 2.0) - 2.0) / (x * x * em1);
        (r1, r2)
    }
}

/// `G(alpha, t)` together with its first two `alpha`-derivatives, expressed
/// as `log G`, `G_alpha / G` and `G_alphaalpha / G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedExp {
    pub log_g: f64,
    pub d1_ratio: f64,
    pub d2_ratio: f64,
}

impl IntegratedExp {
    pub fn new(alpha: f64, t: f64) -> Self {
        if t <= 0.0 {
            return Self {
                log_g: f64::NEG_INFINITY,
                d1_ratio: 0.0,
                d2_ratio: 0.0,
            };
        }
        let x = alpha * t;
        let (r1, r2) = phi_ratios(x);
        Self {
            log_g: t.ln() + log_phi0(x),
            d1_ratio: t * r1,
            d2_ratio: t * t * r2,
        }
    }

    pub fn g(&self) -> f64 {
        self.log_g.min(LOG_CLAMP).exp()
    }
}

/// `(exp(alpha * t) - 1) / alpha`, with the limit `t` at `alpha = 0`.
pub fn integrated_exp(alpha: f64, t: f64) -> f64 {
    if alpha.abs() < ALPHA_ZERO_TOL {
        return t;
    }
    IntegratedExp::new(alpha, t).g()
}

fn log_cumulative_hazard(t: f64, p: &GompertzParams) -> f64 {
    if p.alpha.abs() < ALPHA_ZERO_TOL {
        return p.mu.ln() + t.ln();
    }
    p.mu.ln() + IntegratedExp::new(p.alpha, t).log_g
}

/// Cumulative hazard `(mu / alpha) * (exp(alpha t) - 1)`.
pub fn cumulative_hazard(t: f64, p: &GompertzParams) -> Result<f64> {
    check_time(t)?;
    Ok(log_cumulative_hazard(t, p).min(LOG_CLAMP).exp())
}

/// Hazard `mu * exp(alpha t)`.
pub fn hazard(t: f64, p: &GompertzParams) -> Result<f64> {
    check_time(t)?;
    Ok((p.mu.ln() + p.alpha * t).min(LOG_CLAMP).exp())
}

/// For `alpha < 0` this is evaluated as `c exp(-(mu / alpha) exp(alpha t))`
/// with `c` the cure fraction, which keeps it monotone and never below `c`
/// in floating point.
pub fn survival(t: f64, p: &GompertzParams) -> Result<f64> {
    let h = cumulative_hazard(t, p)?;
    if p.alpha <= -ALPHA_ZERO_TOL {
        let k = p.mu / p.alpha;
        if k > -700.0 {
            return Ok(k.exp() * (-k * (p.alpha * t).exp()).exp());
        }
    }
    Ok((-h).exp())
}

/// Density `mu exp(alpha t) exp(-(mu / alpha)(exp(alpha t) - 1))`.
///
/// For `alpha < 0` the total mass is `1 - cure_fraction(p)`.
pub fn pdf(t: f64, p: &GompertzParams) -> Result<f64> {
    let h = cumulative_hazard(t, p)?;
    let log_f = p.mu.ln() + p.alpha * t - h;
    Ok(log_f.min(LOG_CLAMP).exp())
}

/// Limit of the survival function: `exp(mu / alpha)` when `alpha < 0`, else 0.
pub fn cure_fraction(p: &GompertzParams) -> f64 {
    if p.alpha < 0.0 {
        (p.mu / p.alpha).exp()
    } else {
        0.0
    }
}

/// Inverse of `t -> 1 - exp(-H(t))` where `H` uses the rate `mu * exp(eta)`.
///
/// The returned time solves `F(t) = u` for the (possibly defective) law, so
/// `u` must lie below the susceptible mass `1 - exp(mu exp(eta) / alpha)`.
pub fn susceptible_quantile(u: f64, p: &GompertzParams, eta: f64) -> Result<f64> {
    if !eta.is_finite() {
        return Err(Error::invalid(format!("linear predictor must be finite, got {eta}")));
    }
    if !(u.is_finite() && (0.0..1.0).contains(&u)) {
        return Err(Error::invalid(format!("u must lie in [0, 1), got {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let rate = (p.mu.ln() + eta).exp();
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::invalid(format!("rate mu*exp(eta) is not positive-finite: {rate}")));
    }
    // -log(1 - u) > 0
    let target = -(-u).ln_1p();
    if p.alpha.abs() < ALPHA_ZERO_TOL {
        return Ok(target / rate);
    }
    if p.alpha < 0.0 {
        let mass = -(rate / p.alpha).exp_m1();
        if u >= mass {
            return Err(Error::Domain(format!(
                "u = {u} is not below the susceptible mass {mass}"
            )));
        }
    }
    let inner = p.alpha * target / rate;
    if inner <= -1.0 {
        return Err(Error::Domain(format!(
            "u = {u} lies at the susceptible-mass boundary"
        )));
    }
    let t = inner.ln_1p() / p.alpha;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("quantile for u = {u} is not finite")));
    }
    Ok(t)
}
