//! A small Monte Carlo study: bias and interval coverage over replicates.
//!
//! cargo run --release --example mc_study -- [scenario] [n] [replicates]

use jointcure::harness::run_mc;
use jointcure::inference::{FitOptions, PriorSpec};

fn main() -> jointcure::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let scenario = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let n = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let replicates = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);
    let rep = run_mc(scenario, n, replicates, 1, 0, &PriorSpec::default(), &FitOptions::default())?;
    println!("scenario {scenario}, n = {n}, {replicates} replicates, {} failed", rep.failed);
    println!("{:<10} {:>8} {:>8} {:>9}", "parameter", "truth", "bias", "coverage");
    for r in &rep.rows {
        println!("{:<10} {:>8.3} {:>+8.3} {:>9.2}", r.label, r.truth, r.bias, r.coverage);
    }
    Ok(())
}
