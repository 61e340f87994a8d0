//! Simulate a high-censoring cohort and fit the defective joint model.
//!
//! cargo run --release --example fit_simulated -- [n] [seed]

use jointcure::inference::{fit, FitOptions, PriorSpec};
use jointcure::simulate::{simulate_dataset, fitted_names, simulation_spec, ScenarioConfig};
use rand::SeedableRng;

fn main() -> jointcure::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ScenarioConfig::scenario1(n, seed);
    let data = simulate_dataset(&cfg)?;
    println!("n = {n}, censoring = {:.3}", data.censoring_rate);

    let spec = simulation_spec();
    let start = std::time::Instant::now();
    let fit = fit(&spec, &data.subjects, &PriorSpec::default(), &FitOptions::default())?;
    println!(
        "grid: {} points, {} search iterations, {:.2?}",
        fit.grid.points.len(),
        fit.grid.search_iterations,
        start.elapsed()
    );
    let truth = cfg.truth();
    let table = fit.parameter_table();
    println!("{:<22} {:>9} {:>9} {:>9} {:>9} {:>9}", "parameter", "truth", "mean", "sd", "2.5%", "97.5%");
    let names = fitted_names();
    for p in &table {
        let t = names.iter().position(|n| *n == p.name).map_or(f64::NAN, |i| truth[i]);
        println!("{:<22} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}", p.name, t, p.mean, p.sd, p.q025, p.q975);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let draws = fit.sample(1000, &mut rng);
    let summary = fit.summarize(&draws, None)?;
    println!("P(alpha < 0) = {:.4}", summary.prob_alpha_negative);
    println!(
        "average cure fraction {:.3} (truth {:.3})",
        summary.groups[0].mean,
        data.mean_cure_probability()
    );
    Ok(())
}
