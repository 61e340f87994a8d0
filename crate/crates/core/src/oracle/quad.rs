use nalgebra::{DMatrix, DVector};

use super::NelderMead;
use crate::error::{Error, Result};
use crate::likelihood::{conditional_loglik, log_sum_exp};
use crate::model::{FixedEffects, JointModelSpec, RandomEffects, RandomEffectsSpec, SubjectData};
use crate::quadrature::gauss_hermite;

const MAX_DIM: usize = 4;

/// `log integral pi(D_i | b, theta) pi(b) db` by tensor Gauss-Hermite.
///
/// Shares nothing with the production path beyond the conditional
/// log-likelihood: the centre comes from a simplex search and the scale from
/// second differences of the integrand.
pub fn brute_quadrature_marginal(
    subject: &SubjectData,
    spec: &JointModelSpec,
    fx: &FixedEffects,
    re: &RandomEffectsSpec,
    nodes_per_dim: usize,
) -> Result<f64> {
    let d = re.dim();
    if d > MAX_DIM {
        return Err(Error::invalid(format!("brute quadrature supports at most {MAX_DIM} random effects, got {d}")));
    }
    if nodes_per_dim == 0 {
        return Err(Error::invalid("quadrature needs at least one node"));
    }
    subject.validate(spec)?;
    let dims = re.dims().to_vec();
    let f = |b: &[f64]| -> Result<f64> {
        let r = RandomEffects::new(&dims, b.to_vec())?;
        Ok(conditional_loglik(subject, fx, re, &r)?.total)
    };
    let nm = NelderMead {
        step: 0.2,
        ..Default::default()
    };
    let (mode, _) = nm.minimize(|b| f(b).map_or(f64::INFINITY, |v| -v), &vec![0.0; d]);
    let f0 = f(&mode)?;

    let mut h = DMatrix::zeros(d, d);
    let eps: Vec<f64> = mode.iter().map(|m| 1e-4 * m.abs().max(1.0)).collect();
    let shifted = |i: usize, si: f64, j: usize, sj: f64| -> Result<f64> {
        let mut b = mode.clone();
        b[i] += si * eps[i];
        b[j] += sj * eps[j];
        f(&b)
    };
    for i in 0..d {
        h[(i, i)] = -(shifted(i, 1.0, i, 1.0)? - 2.0 * f0 + shifted(i, -1.0, i, -1.0)?) / (4.0 * eps[i] * eps[i]);
        for j in 0..i {
            let v = -(shifted(i, 1.0, j, 1.0)? - shifted(i, 1.0, j, -1.0)? - shifted(i, -1.0, j, 1.0)?
                + shifted(i, -1.0, j, -1.0)?)
                / (4.0 * eps[i] * eps[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let l = h
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("finite-difference curvature at the subject mode".into()))?
        .l();
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();

    let (x, lw) = gauss_hermite(nodes_per_dim);
    let centre = DVector::from_vec(mode);
    let sqrt2 = std::f64::consts::SQRT_2;
    let total = nodes_per_dim.pow(d as u32);
    let mut terms = Vec::with_capacity(total);
    for flat in 0..total {
        let mut k = flat;
        let idx: Vec<usize> = (0..d)
            .map(|_| {
                let i = k % nodes_per_dim;
                k /= nodes_per_dim;
                i
            })
            .collect();
        let z = DVector::from_iterator(d, idx.iter().map(|&i| sqrt2 * x[i]));
        let shift = l.tr_solve_lower_triangular(&z).expect("positive diagonal");
        let b = &centre + shift;
        let w: f64 = idx.iter().map(|&i| lw[i] + x[i] * x[i]).sum();
        terms.push(w + f(b.as_slice())?);
    }
    Ok(log_sum_exp(&terms) + 0.5 * d as f64 * 2f64.ln() - 0.5 * log_det)
}
