use jointcure::model::{
    longitudinal_linear_predictor, subject_cure_fraction, subject_survival, survival_linear_predictor, FixedEffects,
    LongitudinalRecord, RandomEffects,
};
use proptest::prelude::*;

fn fixed(alpha: f64, gamma0: f64) -> FixedEffects {
    FixedEffects {
        beta: vec![vec![2.5, -0.2, -0.01, 0.1]],
        psi: vec![-0.37],
        gamma: vec![0.68, 0.17],
        gamma0,
        alpha,
    }
}

proptest! {
    #[test]
    fn cure_decreases_in_risk(alpha in -3.0..-0.05f64, g0 in -2.0..1.0f64, eta in -2.0..2.0f64, d in 0.01..1.0f64) {
        let fx = fixed(alpha, g0);
        prop_assert!(subject_cure_fraction(&fx, eta + d) < subject_cure_fraction(&fx, eta));
    }

    #[test]
    fn subject_survival_limit_is_cure(alpha in -3.0..-0.05f64, g0 in -2.0..1.0f64, eta in -2.0..2.0f64) {
        let fx = fixed(alpha, g0);
        let s = subject_survival(1e6, &fx, eta).unwrap();
        prop_assert!((s - subject_cure_fraction(&fx, eta)).abs() < 1e-10);
    }

    #[test]
    fn doubling_covariates_and_halving_coefficients(
        x in prop::collection::vec(-2.0..2.0f64, 4),
        w in -2.0..2.0f64,
        b in prop::collection::vec(-1.0..1.0f64, 2),
        t in 0.0..1.0f64,
    ) {
        let fx = fixed(-0.65, -0.68);
        let re = RandomEffects::new(&[2], b.clone()).unwrap();
        let rec = LongitudinalRecord {
            time: t,
            count: 0,
            biomarker: 0,
            fixed_covariates: x.clone(),
            random_design: vec![1.0, t],
        };
        let l1 = longitudinal_linear_predictor(&rec, &fx, &re).unwrap();
        let s1 = survival_linear_predictor(&[w], &fx, &re).unwrap();
        let half = FixedEffects {
            beta: vec![fx.beta[0].iter().map(|v| v / 2.0).collect()],
            psi: fx.psi.iter().map(|v| v / 2.0).collect(),
            ..fx.clone()
        };
        let rec2 = LongitudinalRecord {
            fixed_covariates: x.iter().map(|v| v * 2.0).collect(),
            ..rec
        };
        let l2 = longitudinal_linear_predictor(&rec2, &half, &re).unwrap();
        let s2 = survival_linear_predictor(&[2.0 * w], &half, &re).unwrap();
        prop_assert!((l1 - l2).abs() < 1e-12 && (s1 - s2).abs() < 1e-12);
    }
}
