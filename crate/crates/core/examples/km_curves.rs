//! Kaplan-Meier curves by treatment arm of a simulated cohort, with the
//! plateau each one levels off at.
//!
//! cargo run --example km_curves -- [n] [seed]

use jointcure::kmsurv::{kaplan_meier_by_group, plateau};
use jointcure::simulate::{simulate_dataset, ScenarioConfig};

fn main() -> jointcure::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let data = simulate_dataset(&ScenarioConfig::scenario1(n, seed))?;
    let times: Vec<f64> = data.subjects.iter().map(|s| s.observed_time).collect();
    let events: Vec<bool> = data.subjects.iter().map(|s| s.event).collect();
    let groups: Vec<String> = data.subjects.iter().map(|s| format!("x1={}", s.survival_covariates[0])).collect();
    for c in kaplan_meier_by_group(&times, &events, &groups)? {
        let p = plateau(&c);
        let g = c.group.clone().unwrap_or_default();
        let members: Vec<usize> = (0..n).filter(|&i| groups[i] == g).collect();
        let truth = members.iter().map(|&i| data.latent[i].cure_probability).sum::<f64>() / members.len() as f64;
        println!(
            "{g}: {} subjects, plateau {:.3} (last time censored: {}), mean true cure probability {truth:.3}",
            members.len(),
            p.value,
            p.informative
        );
        for t in [0.5, 1.0, 2.0, 4.0] {
            println!("  S({t}) = {:.3}", c.at(t));
        }
    }
    Ok(())
}
