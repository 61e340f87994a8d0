use jointcure::kmsurv::{kaplan_meier, kaplan_meier_by_group};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Vec<(f64, bool)>> {
    // a coarse time lattice forces ties
    prop::collection::vec(((0u32..20).prop_map(|k| k as f64 * 0.5), any::<bool>()), 1..60)
}

proptest! {
    #[test]
    fn invariant_to_input_order(data in sample(), seed in any::<u64>()) {
        let (t, e): (Vec<f64>, Vec<bool>) = data.iter().copied().unzip();
        let a = kaplan_meier(&t, &e).unwrap();
        let mut shuffled = data.clone();
        // deterministic Fisher-Yates from the seed
        let mut s = seed | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let (t2, e2): (Vec<f64>, Vec<bool>) = shuffled.into_iter().unzip();
        prop_assert_eq!(a, kaplan_meier(&t2, &e2).unwrap());
    }

    #[test]
    fn curve_is_a_nonincreasing_step(data in sample()) {
        let (t, e): (Vec<f64>, Vec<bool>) = data.iter().copied().unzip();
        let c = kaplan_meier(&t, &e).unwrap();
        prop_assert!(c.survival.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(c.survival.iter().all(|s| (0.0..=1.0).contains(s)));
        prop_assert!(c.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn one_group_equals_pooled(data in sample()) {
        let (t, e): (Vec<f64>, Vec<bool>) = data.iter().copied().unzip();
        let g = vec!["a".to_string(); t.len()];
        let mut by = kaplan_meier_by_group(&t, &e, &g).unwrap();
        let mut pooled = kaplan_meier(&t, &e).unwrap();
        pooled.group = Some("a".into());
        prop_assert_eq!(by.pop().unwrap(), pooled);
    }
}
