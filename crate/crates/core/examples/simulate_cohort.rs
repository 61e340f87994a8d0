//! Draw a cohort from one of the two simulation scenarios and describe it.
//!
//! cargo run --example simulate_cohort -- [scenario] [n] [seed]

use jointcure::simulate::{simulate_dataset, ScenarioConfig};

fn main() -> jointcure::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let scenario = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let n = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ScenarioConfig::by_id(scenario, n, seed)?;
    let data = simulate_dataset(&cfg)?;
    let cured = data.latent.iter().filter(|l| !l.susceptible).count();
    let records: usize = data.subjects.iter().map(|s| s.records.len()).sum();
    println!("scenario {scenario}, n = {n}");
    println!("censoring rate      {:.3}", data.censoring_rate);
    println!("cured (latent)      {:.3}", cured as f64 / n as f64);
    println!("mean cure prob.     {:.3}", data.mean_cure_probability());
    println!("censoring bound     {:.3}", data.censoring_bound);
    println!("records per subject {:.2}", records as f64 / n as f64);
    println!("\nfirst subjects:");
    for (s, l) in data.subjects.iter().zip(&data.latent).take(5) {
        let counts: Vec<u64> = s.records.iter().map(|r| r.count).collect();
        println!(
            "  {:>4} time {:.3} event {} counts {:?} b = ({:+.3}, {:+.3})",
            s.id, s.observed_time, u8::from(s.event), counts, l.random_effects[0], l.random_effects[1]
        );
    }
    Ok(())
}
