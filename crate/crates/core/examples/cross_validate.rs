//! Compare the nested Laplace fit with a long Metropolis run on a small
//! simulated cohort.
//!
//! cargo run --release --features oracle --example cross_validate -- [n] [iterations] [scenario]

use jointcure::inference::{fit, FitOptions, LatentModel, PriorSpec};
use jointcure::oracle::{mh_sample, ChainConfig};
use jointcure::simulate::{simulate_dataset, simulation_spec, ScenarioConfig};

fn main() -> jointcure::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let iters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let scenario: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ScenarioConfig::by_id(scenario, n, 11)?;
    let data = simulate_dataset(&cfg)?;
    println!("{} events in {n} subjects", data.subjects.iter().filter(|s| s.event).count());
    let spec = simulation_spec();
    let t = std::time::Instant::now();
    let fit = fit(&spec, &data.subjects, &PriorSpec::default(), &FitOptions::default())?;
    println!("nested Laplace: {} grid points, {:.2?}", fit.grid.points.len(), t.elapsed());

    let mode = &fit.grid.points[fit.grid.mode_index()];
    let chain_cfg = ChainConfig {
        n_iter: iters,
        burn_in: iters / 5,
        thin: 10,
        n_chains: 4,
        ..Default::default()
    };
    let t = std::time::Instant::now();
    let out = mh_sample(&fit.model, &chain_cfg, Some((&mode.mode.chi, &mode.phi)))?;
    let (lo, hi) = out.acceptance_range();
    println!(
        "Metropolis: {iters} sweeps x {} chains, {:.2?}, acceptance {lo:.2}..{hi:.2}, max R-hat {:.3}",
        chain_cfg.n_chains,
        t.elapsed(),
        out.max_rhat()
    );

    let table = fit.parameter_table();
    let latent = fit.model.latent_names();
    let off = fit.model.n_blocks() * fit.model.block_dim();
    println!("{:<20} {:>9} {:>9} {:>9} {:>9} {:>8}", "parameter", "laplace", "mcmc", "mcmc sd", "mcse", "diff/sd");
    for (j, name) in latent.iter().enumerate().skip(off) {
        let p = table.iter().find(|p| &p.name == name).expect("latent coefficient");
        let (m, s) = (out.mean(j), out.sd(j));
        println!("{name:<20} {:>9.4} {m:>9.4} {s:>9.4} {:>9.4} {:>8.3}", p.mean, out.mcse(j), (p.mean - m) / s);
    }
    let nl = fit.model.latent_dim();
    for (k, name) in fit.model.hyper_names().iter().enumerate() {
        let j = nl + k;
        let h = fit.hyper_marginals()[k];
        println!("{name:<20} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8.3}", h.mode, out.mean(j), out.sd(j), out.mcse(j), (h.mode - out.mean(j)) / out.sd(j));
    }
    Ok(())
}
