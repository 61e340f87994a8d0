/// Nelder-Mead simplex minimizer with dimension-adaptive coefficients and
/// restarts from the best vertex.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    /// Initial simplex edge.
    pub step: f64,
    /// Stop when the spread of simplex values drops below this.
    pub f_tol: f64,
    pub max_evals: usize,
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            step: 0.5,
            f_tol: 1e-14,
            max_evals: 200_000,
            restarts: 8,
        }
    }
}

impl NelderMead {
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64]) -> (Vec<f64>, f64) {
        let mut best = (x0.to_vec(), f(x0));
        let mut step = self.step;
        for _ in 0..=self.restarts {
            let (x, v) = self.run(&f, &best.0, step);
            let gain = best.1 - v;
            if v <= best.1 {
                best = (x, v);
            }
            if gain.abs() <= self.f_tol * best.1.abs().max(1.0) {
                break;
            }
            step = (step * 0.5).max(1e-4);
        }
        best
    }

    fn run(&self, f: &impl Fn(&[f64]) -> f64, x0: &[f64], step: f64) -> (Vec<f64>, f64) {
        let n = x0.len();
        let nf = n as f64;
        let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f(x0)));
        for j in 0..n {
            let mut x = x0.to_vec();
            x[j] += step * x0[j].abs().max(1.0);
            let v = f(&x);
            simplex.push((x, v));
        }
        let mut evals = n + 1;
        let at = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect() };
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            if (hi - lo).abs() <= self.f_tol * lo.abs().max(1.0) {
                break;
            }
            let mut c = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (ci, xi) in c.iter_mut().zip(x) {
                    *ci += xi / nf;
                }
            }
            let worst = simplex[n].0.clone();
            let xr = at(&c, &worst, -alpha);
            let fr = f(&xr);
            evals += 1;
            if fr < simplex[0].1 {
                let xe = at(&c, &worst, -alpha * gamma);
                let fe = f(&xe);
                evals += 1;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < hi {
                let x = at(&c, &xr, rho);
                let v = f(&x);
                (x, v)
            } else {
                let x = at(&c, &worst, rho);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < fr.min(hi) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for (x, v) in simplex.iter_mut().skip(1) {
                *x = at(&x_best, x, sigma);
                *v = f(x);
            }
            evals += n;
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        simplex.swap_remove(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, v) = NelderMead::default().minimize(f, &[-1.2, 1.0]);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5, "{x:?}");
        assert!(v < 1e-10);
    }

    #[test]
    fn quadratic_in_ten_dimensions() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.1 * i as f64).powi(2)).sum();
        let (x, _) = NelderMead::default().minimize(f, &[0.0; 10]);
        for (i, v) in x.iter().enumerate() {
            assert!((v - 0.1 * i as f64).abs() < 1e-5, "{i}: {v}");
        }
    }
}
