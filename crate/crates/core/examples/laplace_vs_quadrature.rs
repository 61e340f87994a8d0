//! Per-subject marginal likelihood: Laplace approximation against adaptive
//! Gauss-Hermite quadrature.
//!
//! cargo run --example laplace_vs_quadrature -- [n] [nodes]

use jointcure::likelihood::{marginal_loglik_subject, Method};
use jointcure::simulate::{simulate_dataset, simulation_spec, ScenarioConfig};

fn main() -> jointcure::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let nodes = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(15);
    let cfg = ScenarioConfig::scenario1(n, 5);
    let data = simulate_dataset(&cfg)?;
    let spec = simulation_spec();
    let re = cfg.random_effects()?;
    println!("{:>5} {:>6} {:>14} {:>14} {:>10}", "id", "event", "laplace", "quadrature", "rel.err");
    for s in &data.subjects {
        let lap = marginal_loglik_subject(s, &spec, &cfg.fixed, &re, Method::Laplace)?;
        let q = marginal_loglik_subject(s, &spec, &cfg.fixed, &re, Method::Quadrature(nodes))?;
        println!("{:>5} {:>6} {lap:>14.6} {q:>14.6} {:>10.2e}", s.id, u8::from(s.event), (lap - q).exp_m1());
    }
    Ok(())
}
