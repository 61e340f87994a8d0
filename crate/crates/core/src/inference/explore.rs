//! Laplace approximation of the hyperparameter posterior, its mode, and the
//! integration grid around it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mode::{latent_mode, LatentMode, ModeOptions};
use super::{corrected_mean, LatentModel, LN_2PI};
use crate::error::{Error, Result};

/// Layout of the integration points in the standardized eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridStrategy {
    /// Lattice up to two hyperparameters, composite design beyond.
    #[default]
    Auto,
    /// Integer lattice filtered by the log-density drop.
    Grid,
    /// Central composite design on a sphere of radius `ccd_f0 * sqrt(m)`.
    Ccd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreOptions {
    pub strategy: GridStrategy,
    /// Largest log-density drop from the mode kept in a lattice grid; 0
    /// keeps the mode alone under any strategy.
    pub delta: f64,
    /// Grid spacing in standardized units.
    pub step: f64,
    /// Largest standardized coordinate along one axis, in steps.
    pub max_axis: usize,
    pub max_points: usize,
    /// Central-difference step for the gradient during the mode search.
    pub gradient_step: f64,
    /// Central-difference step for the curvature at the mode.
    pub hessian_step: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Latent Newton tolerance used while searching.
    pub search_tol: f64,
    /// Standardized distance of the probes that rescale each half-axis to
    /// the observed log-density drop; 0 disables the correction.
    pub skew_probe: f64,
    /// Radius factor of the composite design (> 1).
    pub ccd_f0: f64,
    /// Shift each conditional Gaussian from the mode towards the mean.
    pub mean_correction: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self {
            strategy: GridStrategy::Auto,
            delta: 2.5,
            step: 1.0,
            max_axis: 3,
            max_points: 81,
            gradient_step: 1e-3,
            hessian_step: 1e-2,
            grad_tol: 1e-4,
            max_iter: 200,
            search_tol: 1e-8,
            skew_probe: 2.0,
            ccd_f0: 1.1,
            mean_correction: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub phi: Vec<f64>,
    /// Standardized coordinates before the half-axis stretch.
    pub z: Vec<f64>,
    pub log_post: f64,
    /// Normalized integration weight.
    pub weight: f64,
    pub mode: LatentMode,
    /// Centre of the Gaussian approximation of `chi | phi`: the mode, or
    /// the corrected mean.
    pub mean: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct IntegrationGrid {
    pub points: Vec<GridPoint>,
    pub hyper_mode: Vec<f64>,
    /// Negative Hessian of `log pi(phi | D)` at the mode.
    pub hyper_neg_hessian: DMatrix<f64>,
    /// Grid candidates whose latent mode could not be found.
    pub n_failed: usize,
    pub search_iterations: usize,
    /// Per eigen-axis stretch of the negative and positive half-axes.
    pub axis_scales: Vec<[f64; 2]>,
}

impl IntegrationGrid {
    pub fn hyper_covariance(&self) -> DMatrix<f64> {
        self.hyper_neg_hessian
            .clone()
            .try_inverse()
            .expect("hyper Hessian was checked positive definite")
    }

    /// Index of the point at the hyperparameter mode.
    pub fn mode_index(&self) -> usize {
        self.points
            .iter()
            .position(|p| p.z.iter().all(|&v| v == 0.0))
            .expect("mode is always retained")
    }
}

fn laplace_value(model: &impl LatentModel, lp: f64, mode: &LatentMode) -> f64 {
    lp + mode.value + 0.5 * model.latent_dim() as f64 * LN_2PI - 0.5 * mode.chol.log_det()
}

/// Laplace approximation of `log pi(phi | D)` up to a constant, with the
/// latent mode it was computed at. `None` outside the prior support.
pub(crate) fn evaluate(
    model: &impl LatentModel,
    phi: &[f64],
    start: Option<&DVector<f64>>,
    opts: &ModeOptions,
) -> Result<Option<(f64, LatentMode)>> {
    let lp = model.log_hyper_prior(phi);
    if lp == f64::NEG_INFINITY {
        return Ok(None);
    }
    let mode = latent_mode(model, phi, start, opts)?;
    let v = laplace_value(model, lp, &mode);
    if !v.is_finite() {
        return Err(Error::NonFinite {
            term: "Laplace approximation of the hyperparameter posterior".into(),
        });
    }
    Ok(Some((v, mode)))
}

/// `log pi~(phi | D)` up to the normalizing constant of the posterior;
/// `-inf` outside the prior support.
pub fn log_marginal_hyper(model: &impl LatentModel, phi: &[f64]) -> Result<f64> {
    Ok(evaluate(model, phi, None, &ModeOptions::default())?.map_or(f64::NEG_INFINITY, |(v, _)| v))
}

/// Objective for the search: `log pi~`, with failures mapped to `-inf`.
fn objective(model: &impl LatentModel, phi: &[f64], start: &DVector<f64>, opts: &ModeOptions) -> f64 {
    match evaluate(model, phi, Some(start), opts) {
        Ok(Some((v, _))) => v,
        _ => f64::NEG_INFINITY,
    }
}

fn fd_gradient(model: &impl LatentModel, phi: &[f64], start: &DVector<f64>, h: f64, opts: &ModeOptions) -> Option<DVector<f64>> {
    let m = phi.len();
    let vals: Vec<f64> = (0..2 * m)
        .into_par_iter()
        .map(|k| {
            let mut x = phi.to_vec();
            x[k / 2] += if k % 2 == 0 { h } else { -h };
            objective(model, &x, start, opts)
        })
        .collect();
    let g = DVector::from_fn(m, |j, _| (vals[2 * j] - vals[2 * j + 1]) / (2.0 * h));
    g.iter().all(|v| v.is_finite()).then_some(g)
}

/// Negative Hessian of `log pi~` by central differences.
fn fd_neg_hessian(model: &impl LatentModel, phi: &[f64], f0: f64, start: &DVector<f64>, h: f64, opts: &ModeOptions) -> Result<DMatrix<f64>> {
    let m = phi.len();
    let mut offsets: Vec<Vec<(usize, f64)>> = Vec::new();
    for i in 0..m {
        offsets.push(vec![(i, h)]);
        offsets.push(vec![(i, -h)]);
    }
    for i in 0..m {
        for j in i + 1..m {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                offsets.push(vec![(i, si * h), (j, sj * h)]);
            }
        }
    }
    let vals: Vec<f64> = offsets
        .par_iter()
        .map(|off| {
            let mut x = phi.to_vec();
            for &(k, d) in off {
                x[k] += d;
            }
            objective(model, &x, start, opts)
        })
        .collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::HyperNonconvergence(
            "posterior curvature could not be evaluated around the mode (boundary of the support?)".into(),
        ));
    }
    let mut hm = DMatrix::zeros(m, m);
    for i in 0..m {
        hm[(i, i)] = -(vals[2 * i] - 2.0 * f0 + vals[2 * i + 1]) / (h * h);
    }
    let mut k = 2 * m;
    for i in 0..m {
        for j in i + 1..m {
            let v = -(vals[k] - vals[k + 1] - vals[k + 2] + vals[k + 3]) / (4.0 * h * h);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
            k += 4;
        }
    }
    Ok(hm)
}

const MAX_STALLED_GAIN: f64 = 1e-3;

/// Zeroes the components of `g` that push `x` out through an active bound.
fn project(x: &[f64], g: &DVector<f64>, bounds: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_fn(g.len(), |j, _| {
        let (lo, hi) = bounds[j];
        if (x[j] <= lo && g[j] < 0.0) || (x[j] >= hi && g[j] > 0.0) {
            0.0
        } else {
            g[j]
        }
    })
}

/// Quasi-Newton (BFGS) ascent on `log pi~(phi | D)` with finite-difference
/// gradients, kept far enough inside the prior support for the difference
/// stencils. A mode on that boundary is accepted when the projected gradient
/// vanishes. Returns the mode, its value, its latent mode and the number of
/// iterations.
fn hyper_mode_search(model: &impl LatentModel, opts: &ExploreOptions) -> Result<(Vec<f64>, f64, LatentMode, usize)> {
    let mopts = ModeOptions {
        tol: opts.search_tol,
        ..ModeOptions::default()
    };
    let m = model.hyper_dim();
    let margin = 2.0 * opts.gradient_step.max(opts.hessian_step);
    let bounds: Vec<(f64, f64)> = model
        .hyper_bounds()
        .into_iter()
        .map(|(lo, hi)| (lo + margin, hi - margin))
        .collect();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.iter().zip(&bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect() };
    let mut x = clamp(model.initial_hyper());
    let (mut f, mut mode) = evaluate(model, &x, None, &mopts)?
        .ok_or_else(|| Error::HyperNonconvergence("starting point lies outside the prior support".into()))?;
    let h = opts.gradient_step;
    let mut g = fd_gradient(model, &x, &mode.chi, h, &mopts)
        .ok_or_else(|| Error::HyperNonconvergence("gradient undefined at the start".into()))?;
    let mut pg = project(&x, &g, &bounds);
    let mut hinv = DMatrix::identity(m, m);
    let mut iter = 0;
    let mut stalled = false;
    while iter < opts.max_iter {
        if pg.amax() < opts.grad_tol {
            break;
        }
        iter += 1;
        // ascent direction; fall back to steepest ascent if BFGS lost it
        let mut p = project(&x, &(&hinv * &pg), &bounds);
        if p.dot(&pg) <= 0.0 {
            hinv = DMatrix::identity(m, m);
            p = pg.clone();
        }
        let pmax = p.amax();
        if pmax > 2.0 {
            p *= 2.0 / pmax;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = clamp(x.iter().zip(p.iter()).map(|(a, b)| a + t * b).collect());
            let slope: f64 = cand.iter().zip(&x).zip(g.iter()).map(|((c, a), gj)| (c - a) * gj).sum();
            if let Ok(Some((v, md))) = evaluate(model, &cand, Some(&mode.chi), &mopts) {
                if v >= f + 1e-4 * slope {
                    accepted = Some((cand, v, md));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, mdn)) = accepted else {
            stalled = true;
            break;
        };
        let gn = fd_gradient(model, &xn, &mdn.chi, h, &mopts)
            .ok_or_else(|| Error::HyperNonconvergence("gradient undefined during the search".into()))?;
        let s = DVector::from_iterator(m, xn.iter().zip(&x).map(|(a, b)| a - b));
        // ascent on f is descent on -f: y = -(gn - g)
        let y = -(&gn - &g);
        let sy = s.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(m, m);
            let a = &i - &s * y.transpose() * rho;
            let b = &i - &y * s.transpose() * rho;
            hinv = &a * &hinv * &b + &s * s.transpose() * rho;
        }
        let small_change = (fnew - f).abs() < 1e-10 * f.abs().max(1.0) && s.amax() < 1e-7;
        x = xn;
        f = fnew;
        mode = mdn;
        g = gn;
        pg = project(&x, &g, &bounds);
        if small_change {
            stalled = true;
            break;
        }
    }
    // a stalled search counts as converged when the quasi-Newton model
    // predicts a negligible further gain
    let gain = 0.5 * pg.dot(&(&hinv * &pg));
    let converged = pg.amax() < 1e2 * opts.grad_tol || (stalled && (0.0..MAX_STALLED_GAIN).contains(&gain));
    if !converged {
        return Err(Error::HyperNonconvergence(format!(
            "no convergence after {iter} iterations (gradient max-norm {:.3e}, predicted gain {gain:.3e})",
            pg.amax()
        )));
    }
    Ok((x, f, mode, iter))
}

/// Integer vectors with `|z_j| <= max_axis` and `|z|^2 <= r2`.
fn lattice(m: usize, max_axis: i32, r2: i32) -> Vec<Vec<i32>> {
    fn rec(prefix: &mut Vec<i32>, m: usize, max_axis: i32, left: i32, out: &mut Vec<Vec<i32>>) {
        if prefix.len() == m {
            out.push(prefix.clone());
            return;
        }
        for v in -max_axis..=max_axis {
            if v * v <= left {
                prefix.push(v);
                rec(prefix, m, max_axis, left - v * v, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(m), m, max_axis, r2, &mut out);
    out
}

/// Grid candidates: whole shells of `|z|^2`, nearest first, while the
/// Gaussian-predicted drop stays within `delta` and the count within
/// `max_points`.
pub(crate) fn grid_candidates(m: usize, opts: &ExploreOptions) -> Vec<Vec<i32>> {
    let s2 = opts.step * opts.step;
    let r2_max = if s2 > 0.0 {
        ((2.0 * opts.delta / s2).floor() as i64).min(i32::MAX as i64) as i32
    } else {
        0
    };
    let max_axis = opts.max_axis as i32;
    let r2_max = r2_max.min(max_axis * max_axis * m as i32);
    let mut pts = lattice(m, max_axis, r2_max);
    let norm = |z: &Vec<i32>| z.iter().map(|v| v * v).sum::<i32>();
    pts.sort_by_key(|z| norm(z));
    let mut out = Vec::new();
    let mut k = 0;
    while k < pts.len() {
        let r = norm(&pts[k]);
        let end = pts[k..].iter().position(|z| norm(z) != r).map_or(pts.len(), |e| k + e);
        if out.len() + (end - k) > opts.max_points.max(1) {
            break;
        }
        out.extend_from_slice(&pts[k..end]);
        k = end;
    }
    out
}

const MIN_AXIS_SCALE: f64 = 1.0 / 3.0;
const MAX_AXIS_SCALE: f64 = 3.0;

/// Stretch of each half-axis so that the Gaussian drop at `probe` matches
/// the observed one.
fn axis_scales(
    model: &impl LatentModel,
    phi_star: &[f64],
    f_star: f64,
    start: &DVector<f64>,
    scale: &DMatrix<f64>,
    probe: f64,
    opts: &ModeOptions,
) -> Vec<[f64; 2]> {
    let m = phi_star.len();
    if probe <= 0.0 {
        return vec![[1.0, 1.0]; m];
    }
    let jobs: Vec<(usize, usize)> = (0..m).flat_map(|k| [(k, 0), (k, 1)]).collect();
    let s: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, side)| {
            let sign = if side == 0 { -1.0 } else { 1.0 };
            let phi: Vec<f64> = (0..m).map(|j| phi_star[j] + sign * probe * scale[(j, k)]).collect();
            match evaluate(model, &phi, Some(start), opts) {
                Ok(Some((v, _))) if f_star - v > 0.0 => {
                    (0.5 * probe * probe / (f_star - v)).sqrt().clamp(MIN_AXIS_SCALE, MAX_AXIS_SCALE)
                }
                Ok(Some(_)) => MAX_AXIS_SCALE,
                // the probe left the support or failed: do not stretch
                _ => 1.0,
            }
        })
        .collect();
    (0..m).map(|k| [s[2 * k], s[2 * k + 1]]).collect()
}

/// Mode search, curvature and grid construction.
pub fn explore_hyper(model: &impl LatentModel, opts: &ExploreOptions) -> Result<IntegrationGrid> {
    let (phi_star, f_star, mode_star, iters) = hyper_mode_search(model, opts)?;
    let mopts = ModeOptions {
        tol: opts.search_tol,
        ..ModeOptions::default()
    };
    let hess = fd_neg_hessian(model, &phi_star, f_star, &mode_star.chi, opts.hessian_step, &mopts)?;
    let hess = (&hess + hess.transpose()) * 0.5;
    let eig = SymmetricEigen::new(hess.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::HyperNonconvergence(format!(
            "posterior curvature at the mode is not positive definite (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    let m = phi_star.len();
    let scale = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let final_opts = ModeOptions::default();
    let stretch = axis_scales(model, &phi_star, f_star, &mode_star.chi, &scale, opts.skew_probe, &final_opts);
    let half = |k: usize, v: f64| {
        if v < 0.0 {
            stretch[k][0]
        } else if v > 0.0 {
            stretch[k][1]
        } else {
            0.5 * (stretch[k][0] + stretch[k][1])
        }
    };
    let use_ccd = match opts.strategy {
        GridStrategy::Auto => m > 2,
        GridStrategy::Grid => false,
        GridStrategy::Ccd => true,
    };
    // (standardized point, design weight); lattice weights come from the density alone
    let design: Vec<(Vec<f64>, f64)> = if opts.delta <= 0.0 {
        vec![(vec![0.0; m], 1.0)]
    } else if use_ccd {
        ccd_design(m, opts.ccd_f0, opts.max_points)?
    } else {
        grid_candidates(m, opts)
            .into_iter()
            .map(|z| (z.iter().map(|&v| v as f64 * opts.step).collect(), 1.0))
            .collect()
    };
    let evals: Vec<_> = design
        .into_par_iter()
        .map(|(z, w)| {
            let zv = DVector::from_iterator(m, z.iter().enumerate().map(|(k, &v)| v * half(k, v)));
            let off = &scale * zv;
            let phi: Vec<f64> = phi_star.iter().zip(off.iter()).map(|(a, b)| a + b).collect();
            let r = if z.iter().all(|&v| v == 0.0) {
                Ok(Some((f_star, mode_star.clone())))
            } else {
                evaluate(model, &phi, Some(&mode_star.chi), &final_opts)
            };
            (z, w, phi, r)
        })
        .collect();
    let mut points = Vec::new();
    let mut log_w = Vec::new();
    let mut n_failed = 0;
    for (z, w, phi, r) in evals {
        match r {
            Ok(Some((v, mode))) => {
                if use_ccd || f_star - v <= opts.delta {
                    // density times design weight times the stretched cell volume
                    log_w.push(v + w.ln() + z.iter().enumerate().map(|(k, &x)| half(k, x).ln()).sum::<f64>());
                    points.push(GridPoint {
                        phi,
                        z,
                        log_post: v,
                        weight: 0.0,
                        mean: mode.chi.clone(),
                        mode,
                    });
                }
            }
            Ok(None) => {}
            Err(_) => n_failed += 1,
        }
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_w.iter().map(|w| (w - top).exp()).sum();
    for (p, w) in points.iter_mut().zip(&log_w) {
        p.weight = (w - top).exp() / total;
    }
    if opts.mean_correction {
        points.par_iter_mut().try_for_each(|p| -> Result<()> {
            p.mean = corrected_mean(model, &p.phi, &p.mode)?;
            Ok(())
        })?;
    }
    Ok(IntegrationGrid {
        points,
        hyper_mode: phi_star,
        hyper_neg_hessian: hess,
        n_failed,
        search_iterations: iters,
        axis_scales: stretch,
    })
}

/// Columns of a two-level orthogonal array: the base factors of a full
/// `2^k` factorial, then their interactions from the highest order down.
fn factorial_columns(m: usize, k: usize) -> Vec<Vec<f64>> {
    let runs = 1usize << k;
    let mut masks: Vec<u32> = (1..(1u32 << k)).filter(|w| w.count_ones() == 1).collect();
    let mut inter: Vec<u32> = (1..(1u32 << k)).filter(|w| w.count_ones() > 1).collect();
    inter.sort_by_key(|w| (std::cmp::Reverse(w.count_ones()), *w));
    masks.extend(inter);
    masks
        .into_iter()
        .take(m)
        .map(|mask| {
            (0..runs)
                .map(|r| {
                    // product of the selected base factors at run r
                    if (r as u32 & mask).count_ones() % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Centre, two-level factorial and axial points scaled to radius
/// `f0 * sqrt(m)`, with weights that integrate a standard Gaussian's first
/// and second moments exactly. The factorial part is the largest `2^k`
/// fraction fitting in `max_points`.
pub(crate) fn ccd_design(m: usize, f0: f64, max_points: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    if !(f0 > 1.0) {
        return Err(Error::Config("ccd_f0 must exceed 1".into()));
    }
    let axial = 2 * m + 1;
    let k_min = (usize::BITS - m.leading_zeros()) as usize; // 2^k > m
    let mut k = k_min;
    while k < m && (1usize << (k + 1)) + axial <= max_points {
        k += 1;
    }
    if (1usize << k) + axial > max_points {
        return Err(Error::Config(format!(
            "a composite design in {m} dimensions needs {} points, above max_points = {max_points}",
            (1usize << k) + axial
        )));
    }
    let r = f0 * (m as f64).sqrt();
    let cols = factorial_columns(m, k);
    let mut pts: Vec<Vec<f64>> = vec![vec![0.0; m]];
    for run in 0..(1usize << k) {
        pts.push(cols.iter().map(|c| c[run] * f0).collect());
    }
    for j in 0..m {
        for sign in [-1.0, 1.0] {
            let mut z = vec![0.0; m];
            z[j] = sign * r;
            pts.push(z);
        }
    }
    let n = (pts.len() - 1) as f64;
    let w = 1.0 / (n * (f0 * f0 - 1.0) * (-0.5 * r * r).exp());
    Ok(pts
        .into_iter()
        .enumerate()
        .map(|(i, z)| (z, if i == 0 { 1.0 } else { w }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::toy::GaussianToy;
    use crate::inference::LatentDerivatives;
    use crate::linalg::BorderedMatrix;

    #[test]
    fn projection_drops_outward_components_at_bounds() {
        let b = [(-1.0, 1.0), (-1.0, 1.0), (f64::NEG_INFINITY, f64::INFINITY)];
        let g = DVector::from_vec(vec![2.0, 2.0, -3.0]);
        let p = project(&[1.0, -1.0, 5.0], &g, &b);
        assert_eq!(p.as_slice(), &[0.0, 2.0, -3.0]);
    }

    #[test]
    fn laplace_is_exact_on_gaussian_toy() {
        let toy = GaussianToy::example();
        // constant difference between Laplace value and prior + evidence must be zero
        for phi in [-1.0, -0.2, 0.3, 1.1] {
            let v = log_marginal_hyper(&toy, &[phi]).unwrap();
            let exact = toy.log_hyper_prior(&[phi]) + toy.log_evidence(phi);
            assert!((v - exact).abs() < 1e-9, "{phi}: {v} vs {exact}");
        }
    }

    #[test]
    fn candidate_counts() {
        let o = ExploreOptions::default();
        assert_eq!(grid_candidates(1, &o).len(), 5);
        assert_eq!(grid_candidates(4, &o).len(), 65);
        assert_eq!(grid_candidates(11, &o).len(), 23);
        let zero = ExploreOptions { delta: 0.0, ..o };
        assert_eq!(grid_candidates(4, &zero), vec![vec![0; 4]]);
    }

    /// Conditional independent of phi; the hyper posterior is the Gaussian prior.
    struct PriorOnly {
        mean: Vec<f64>,
        sd: Vec<f64>,
    }

    impl PriorOnly {
        fn one() -> Self {
            Self {
                mean: vec![0.7],
                sd: vec![0.3],
            }
        }
    }

    impl LatentModel for PriorOnly {
        fn n_blocks(&self) -> usize {
            1
        }
        fn block_dim(&self) -> usize {
            1
        }
        fn border_dim(&self) -> usize {
            0
        }
        fn hyper_dim(&self) -> usize {
            self.mean.len()
        }
        fn log_hyper_prior(&self, phi: &[f64]) -> f64 {
            phi.iter()
                .zip(self.mean.iter().zip(&self.sd))
                .map(|(x, (m, s))| -0.5 * ((x - m) / s).powi(2))
                .sum()
        }
        fn log_conditional(&self, chi: &DVector<f64>, _phi: &[f64]) -> Result<f64> {
            Ok(-0.5 * chi[0] * chi[0])
        }
        fn conditional_derivatives(&self, chi: &DVector<f64>, phi: &[f64]) -> Result<LatentDerivatives> {
            let mut h = BorderedMatrix::zeros(1, 1, 0);
            h.blocks[0][(0, 0)] = 1.0;
            Ok(LatentDerivatives {
                value: self.log_conditional(chi, phi)?,
                grad: -chi.clone(),
                neg_hess: h,
            })
        }
    }

    #[test]
    fn one_dimensional_grid_is_symmetric() {
        let g = explore_hyper(&PriorOnly::one(), &ExploreOptions::default()).unwrap();
        assert!((g.hyper_mode[0] - 0.7).abs() < 1e-5);
        assert!((g.hyper_neg_hessian[(0, 0)] - 1.0 / 0.09).abs() < 1e-4);
        assert_eq!(g.points.len(), 5);
        let total: f64 = g.points.iter().map(|p| p.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut phis: Vec<f64> = g.points.iter().map(|p| p.phi[0] - g.hyper_mode[0]).collect();
        phis.sort_by(f64::total_cmp);
        for k in 0..phis.len() {
            assert!((phis[k] + phis[phis.len() - 1 - k]).abs() < 1e-12);
        }
        let w = |z: f64| g.points.iter().find(|p| p.z[0] == z).unwrap().weight;
        assert!((w(1.0) - w(-1.0)).abs() < 1e-6 && (w(2.0) - w(-2.0)).abs() < 1e-6);
    }

    #[test]
    fn composite_design_sizes() {
        let size = |m| ccd_design(m, 1.1, 81).unwrap().len();
        // full factorial up to six dimensions, then fractions
        assert_eq!(size(3), 1 + 8 + 6);
        assert_eq!(size(6), 1 + 64 + 12);
        assert_eq!(size(7), 1 + 64 + 14);
        assert_eq!(size(15), 1 + 32 + 30);
        assert!(ccd_design(40, 1.1, 81).is_err());
        assert!(ccd_design(3, 1.0, 81).is_err());
    }

    #[test]
    fn composite_design_integrates_gaussian_moments() {
        for m in [3, 6, 7, 11, 15] {
            let d = ccd_design(m, 1.1, 81).unwrap();
            let w: Vec<f64> = d
                .iter()
                .map(|(z, w)| w * (-0.5 * z.iter().map(|v| v * v).sum::<f64>()).exp())
                .collect();
            let total: f64 = w.iter().sum();
            for i in 0..m {
                for j in 0..m {
                    let c: f64 = d.iter().zip(&w).map(|((z, _), w)| w * z[i] * z[j]).sum::<f64>() / total;
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((c - expect).abs() < 1e-12, "m={m} ({i},{j}): {c}");
                }
                let first: f64 = d.iter().zip(&w).map(|((z, _), w)| w * z[i]).sum::<f64>();
                assert!(first.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn composite_grid_recovers_gaussian_hyper_moments() {
        let model = PriorOnly {
            mean: vec![0.5, -1.0, 2.0],
            sd: vec![0.3, 1.5, 0.8],
        };
        let g = explore_hyper(&model, &ExploreOptions::default()).unwrap();
        assert_eq!(g.points.len(), 15);
        for j in 0..3 {
            let mean: f64 = g.points.iter().map(|p| p.weight * p.phi[j]).sum();
            let var: f64 = g.points.iter().map(|p| p.weight * (p.phi[j] - mean).powi(2)).sum();
            assert!((mean - model.mean[j]).abs() < 1e-5, "{j}: {mean}");
            assert!((var / model.sd[j].powi(2) - 1.0).abs() < 1e-3, "{j}: {var}");
        }
    }

    #[test]
    fn zero_delta_collapses_to_mode() {
        let toy = GaussianToy::example();
        let g = explore_hyper(&toy, &ExploreOptions { delta: 0.0, ..Default::default() }).unwrap();
        assert_eq!(g.points.len(), 1);
        assert_eq!(g.points[0].weight, 1.0);
    }

    #[test]
    fn toy_mode_matches_closed_form() {
        let toy = GaussianToy::example();
        let g = explore_hyper(&toy, &ExploreOptions::default()).unwrap();
        let f = |x: f64| toy.log_hyper_prior(&[x]) + toy.log_evidence(x);
        let h = 1e-5;
        let x = g.hyper_mode[0];
        let d = (f(x + h) - f(x - h)) / (2.0 * h);
        assert!(d.abs() < 1e-3, "derivative at mode {d}");
        assert!(g.points.len() >= 3);
    }
}
