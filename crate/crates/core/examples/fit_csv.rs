//! Fit a dataset described by a run configuration and print the posterior
//! summary, hazard ratios and group cure fractions.
//!
//! cargo run --release --example fit_csv -- path/to/config.toml
//!
//! `jointcure simulate --out-dir sim` writes a suitable `sim/config.toml`.

use std::path::PathBuf;

use jointcure::harness::{ingest, RunConfig};
use jointcure::inference::fit;
use jointcure::simulate::rng_for;

fn main() -> jointcure::Result<()> {
    let path: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .ok_or_else(|| jointcure::Error::Config("usage: fit_csv <config.toml>".into()))?;
    let cfg = RunConfig::load(&path)?;
    let data = ingest(&cfg)?;
    let s = data.summary();
    println!(
        "{} subjects, {} records, {} events, censoring {:.2}%",
        s.n_subjects,
        s.n_records,
        s.n_events,
        100.0 * s.censoring_rate
    );
    let f = fit(&data.spec, &data.subjects, &cfg.priors, &cfg.inference)?;
    let draws = f.sample(cfg.inference.n_draws, &mut rng_for(cfg.seed, 0));
    let summary = f.summarize(&draws, data.groups.as_deref())?;
    println!("{:<28} {:>9} {:>9} {:>9} {:>9}", "parameter", "mean", "sd", "2.5%", "97.5%");
    for p in summary.parameters.iter().chain(&summary.hazard_ratios) {
        println!("{:<28} {:>9.4} {:>9.4} {:>9.4} {:>9.4}", p.name, p.mean, p.sd, p.q025, p.q975);
    }
    println!("P(alpha < 0) = {:.4}", summary.prob_alpha_negative);
    for g in &summary.groups {
        println!("cure fraction {}: {:.3} ({:.3}, {:.3})", g.group, g.mean, g.q025, g.q975);
    }
    Ok(())
}
