//! Kaplan-Meier product-limit estimator.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};

/// Step function of a product-limit estimate. `times[0] = 0` and
/// `survival[0] = 1`; later entries are the distinct event times.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    pub group: Option<String>,
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    /// Whether the largest observed time is a censoring.
    pub last_censored: bool,
}

impl KmCurve {
    /// Estimate at time `t` (right-continuous).
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

/// Terminal level of a curve and whether it signals long-term survivors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub value: f64,
    pub informative: bool,
}

pub fn plateau(curve: &KmCurve) -> Plateau {
    Plateau {
        value: *curve.survival.last().expect("curve has an origin point"),
        informative: curve.last_censored,
    }
}

fn single(times: &[f64], events: &[bool], group: Option<String>) -> KmCurve {
    // events sort before censorings at tied times
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(events[b].cmp(&events[a])));
    let n = times.len();
    let last_censored = order.last().is_some_and(|&i| !events[i]);
    let mut curve = KmCurve {
        group,
        times: vec![0.0],
        survival: vec![1.0],
        at_risk: vec![n],
        events: vec![0],
        last_censored,
    };
    let mut s = 1.0;
    let mut removed = 0;
    let mut k = 0;
    while k < n {
        let t = times[order[k]];
        let mut d = 0;
        let mut c = 0;
        while k < n && times[order[k]] == t {
            if events[order[k]] {
                d += 1;
            } else {
                c += 1;
            }
            k += 1;
        }
        let r = n - removed;
        if d > 0 {
            s *= 1.0 - d as f64 / r as f64;
            if t == 0.0 {
                curve.survival[0] = s;
                curve.events[0] = d;
            } else {
                curve.times.push(t);
                curve.survival.push(s);
                curve.at_risk.push(r);
                curve.events.push(d);
            }
        }
        removed += d + c;
    }
    curve
}

fn check(times: &[f64], events: &[bool]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("Kaplan-Meier needs at least one observation"));
    }
    if times.len() != events.len() {
        return Err(Error::DimensionMismatch {
            context: "Kaplan-Meier events".into(),
            expected: times.len(),
            got: events.len(),
        });
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::invalid(format!("Kaplan-Meier time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<KmCurve> {
    check(times, events)?;
    Ok(single(times, events, None))
}

/// One curve per group label, in sorted label order.
pub fn kaplan_meier_by_group(times: &[f64], events: &[bool], groups: &[String]) -> Result<Vec<KmCurve>> {
    check(times, events)?;
    if groups.len() != times.len() {
        return Err(Error::DimensionMismatch {
            context: "Kaplan-Meier groups".into(),
            expected: times.len(),
            got: groups.len(),
        });
    }
    let mut by: BTreeMap<&str, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for ((t, e), g) in times.iter().zip(events).zip(groups) {
        let entry = by.entry(g.as_str()).or_default();
        entry.0.push(*t);
        entry.1.push(*e);
    }
    Ok(by
        .into_iter()
        .map(|(g, (t, e))| single(&t, &e, Some(g.to_string())))
        .collect())
}

/// Plot data: `group,time,estimate,at_risk`.
pub fn write_csv(curves: &[KmCurve], mut out: impl Write) -> Result<()> {
    writeln!(out, "group,time,estimate,at_risk")?;
    for c in curves {
        let g = c.group.as_deref().unwrap_or("all");
        for i in 0..c.times.len() {
            writeln!(
                out,
                "{},{},{},{}",
                g,
                crate::harness::fmt6(c.times[i]),
                crate::harness::fmt6(c.survival[i]),
                c.at_risk[i]
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let c = kaplan_meier(&[1.0, 2.0, 3.0, 4.0, 5.0], &[true, true, false, true, false]).unwrap();
        assert!((c.at(1.0) - 0.8).abs() < 1e-15);
        assert!((c.at(2.0) - 0.6).abs() < 1e-15);
        assert!((c.at(3.5) - 0.6).abs() < 1e-15);
        assert!((c.at(4.0) - 0.3).abs() < 1e-15);
        assert_eq!(c.at_risk, vec![5, 5, 4, 2]);
        let p = plateau(&c);
        assert!((p.value - 0.3).abs() < 1e-15 && p.informative);
    }

    #[test]
    fn all_censored_is_flat() {
        let c = kaplan_meier(&[1.0, 2.0, 3.0], &[false; 3]).unwrap();
        assert_eq!(c.survival, vec![1.0]);
        assert_eq!(plateau(&c), Plateau { value: 1.0, informative: true });
    }

    #[test]
    fn last_event_gives_zero_plateau() {
        let c = kaplan_meier(&[1.0, 2.0], &[false, true]).unwrap();
        let p = plateau(&c);
        assert_eq!(p.value, 0.0);
        assert!(!p.informative);
    }

    #[test]
    fn no_censoring_is_empirical() {
        let t = [0.5, 1.5, 1.5, 2.0, 3.0, 0.7];
        let c = kaplan_meier(&t, &[true; 6]).unwrap();
        for x in [0.0, 0.6, 0.7, 1.0, 1.5, 2.5, 3.0, 4.0] {
            let emp = t.iter().filter(|&&v| v > x).count() as f64 / 6.0;
            assert!((c.at(x) - emp).abs() < 1e-15, "{x}");
        }
    }

    #[test]
    fn ties_events_before_censorings() {
        // the censoring at 2 still counts in the risk set at 2
        let c = kaplan_meier(&[1.0, 2.0, 2.0, 3.0], &[true, true, false, true]).unwrap();
        assert_eq!(c.at_risk, vec![4, 4, 3, 1]);
        assert!((c.at(2.0) - 0.75 * (2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn groups_and_errors() {
        let g: Vec<String> = ["a", "b", "a", "b"].iter().map(|s| s.to_string()).collect();
        let cs = kaplan_meier_by_group(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true], &g).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].group.as_deref(), Some("a"));
        assert_eq!(cs[0].survival, vec![1.0, 0.5, 0.0]);
        assert!(kaplan_meier(&[], &[]).is_err());
        assert!(kaplan_meier(&[-1.0], &[true]).is_err());
    }
}
