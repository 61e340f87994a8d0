//! Gauss-Hermite rules.

use std::f64::consts::PI;

/// Nodes and log-weights of the `n`-point Gauss-Hermite rule for the weight
/// `exp(-x^2)` (physicists' convention), nodes ascending.
///
/// Weights are returned as logarithms since the outer weights underflow
/// quickly relative to the `exp(x^2)` factor they are paired with in
/// adaptive quadrature.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut log_w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        // Initial guesses from Numerical Recipes' gauher.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n + 1 - i],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (p1, dp) = hermite_orthonormal(n, z);
            pp = dp;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, dp) = hermite_orthonormal(n, z);
        pp = if dp != 0.0 { dp } else { pp };
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        let lw = (2.0f64).ln() - 2.0 * pp.abs().ln();
        log_w[n - 1 - i] = lw;
        log_w[i] = lw;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, log_w)
}

/// Orthonormal Hermite polynomial `p_n(x)` and its derivative.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64) {
    let pim4 = PI.powf(-0.25);
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    let dp = (2.0 * n as f64).sqrt() * p2;
    (p1, dp)
}

/// Expectation of `f(Z)`, `Z ~ N(mean, sd^2)`, by an `n`-point rule.
pub fn normal_expectation(mean: f64, sd: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, lw) = gauss_hermite(n);
    let s2 = std::f64::consts::SQRT_2 * sd;
    x.iter()
        .zip(&lw)
        .map(|(xi, lwi)| lwi.exp() * f(mean + s2 * xi))
        .sum::<f64>()
        / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules_match_tables() {
        let (x, lw) = gauss_hermite(1);
        assert_eq!(x, vec![0.0]);
        assert!((lw[0].exp() - PI.sqrt()).abs() < 1e-14);

        let (x, lw) = gauss_hermite(3);
        let r = (1.5f64).sqrt();
        assert!((x[2] - r).abs() < 1e-14 && (x[0] + r).abs() < 1e-14 && x[1] == 0.0);
        assert!((lw[1].exp() - 2.0 * PI.sqrt() / 3.0).abs() < 1e-14);
        assert!((lw[0].exp() - PI.sqrt() / 6.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [2usize, 5, 10, 15, 25, 40] {
            let (x, lw) = gauss_hermite(n);
            let w: Vec<f64> = lw.iter().map(|v| v.exp()).collect();
            // integral x^{2k} exp(-x^2) = Gamma(k + 1/2)
            for k in 0..n.min(8) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(2 * k as i32)).sum();
                let exact = statrs::function::gamma::gamma(k as f64 + 0.5);
                assert!((q - exact).abs() < 1e-10 * exact, "n={n} k={k}: {q} vs {exact}");
            }
            let odd: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(3)).sum();
            assert!(odd.abs() < 1e-12);
        }
    }

    #[test]
    fn lognormal_mean() {
        let m = normal_expectation(0.3, 0.4, 20, f64::exp);
        assert!((m - (0.3f64 + 0.08).exp()).abs() < 1e-12);
    }
}
