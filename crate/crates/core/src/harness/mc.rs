//! Monte Carlo study: simulate, fit and score bias and interval coverage.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::fmt6;
use crate::error::{Error, Result};
use crate::inference::{fit, FitOptions, PriorSpec};
use crate::simulate::{fitted_names, rng_for, simulate_dataset_with, simulation_spec, truth_names, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    /// Name in the fitted parameter table.
    pub parameter: String,
    pub label: String,
    pub truth: f64,
    pub bias: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub scenario: u32,
    pub n: usize,
    pub replicates: usize,
    pub failed: usize,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn row(&self, label: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn failure_rate(&self) -> f64 {
        self.failed as f64 / self.replicates as f64
    }
}

/// Posterior means and interval hits of one replicate, in
/// [`truth_names`] order.
pub type ReplicateOutcome = Vec<(f64, bool)>;

/// One replicate: the cohort comes from stream `replicate` of `seed`.
pub fn run_replicate(
    scenario: u32,
    n: usize,
    seed: u64,
    replicate: u64,
    priors: &PriorSpec,
    options: &FitOptions,
) -> Result<ReplicateOutcome> {
    let cfg = ScenarioConfig::by_id(scenario, n, seed)?;
    let data = simulate_dataset_with(&cfg, &mut rng_for(seed, replicate))?;
    let spec = simulation_spec();
    let table = fit(&spec, &data.subjects, priors, options)?.parameter_table();
    fitted_names()
        .iter()
        .zip(cfg.truth())
        .map(|(name, truth)| {
            let p = table
                .iter()
                .find(|p| &p.name == name)
                .ok_or_else(|| Error::invalid(format!("fit reports no parameter '{name}'")))?;
            Ok((p.mean, p.covers(truth)))
        })
        .collect()
}

/// Runs `replicates` fits on `threads` workers (0: the global pool).
/// Failed replicates are reported on stderr and counted; the aggregate is
/// independent of scheduling.
pub fn run_mc(
    scenario: u32,
    n: usize,
    replicates: usize,
    seed: u64,
    threads: usize,
    priors: &PriorSpec,
    options: &FitOptions,
) -> Result<McReport> {
    if replicates == 0 {
        return Err(Error::Config("the study needs at least one replicate".into()));
    }
    let truth = ScenarioConfig::by_id(scenario, n, seed)?.truth();
    let work = || -> Vec<Result<ReplicateOutcome>> {
        (0..replicates as u64)
            .into_par_iter()
            .map(|r| run_replicate(scenario, n, seed, r, priors, options))
            .collect()
    };
    let outcomes = if threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)
    };
    let mut ok = Vec::new();
    let mut failed = 0;
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => {
                eprintln!("replicate {r} failed: {e}");
                failed += 1;
            }
        }
    }
    let m = ok.len() as f64;
    let rows = truth_names()
        .into_iter()
        .zip(fitted_names())
        .zip(truth)
        .enumerate()
        .map(|(j, ((label, parameter), t))| {
            let (bias, coverage) = if ok.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (
                    ok.iter().map(|o| o[j].0 - t).sum::<f64>() / m,
                    ok.iter().filter(|o| o[j].1).count() as f64 / m,
                )
            };
            McRow {
                parameter,
                label,
                truth: t,
                bias,
                coverage,
            }
        })
        .collect();
    Ok(McReport {
        scenario,
        n,
        replicates,
        failed,
        rows,
    })
}

/// `scenario,n,replicates,failed,parameter,label,truth,bias,coverage`
pub fn write_report(report: &McReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "n",
        "replicates",
        "failed",
        "parameter",
        "label",
        "truth",
        "bias",
        "coverage",
    ])?;
    for r in &report.rows {
        w.write_record([
            report.scenario.to_string(),
            report.n.to_string(),
            report.replicates.to_string(),
            report.failed.to_string(),
            r.parameter.clone(),
            r.label.clone(),
            fmt6(r.truth),
            fmt6(r.bias),
            fmt6(r.coverage),
        ])?;
    }
    w.flush()?;
    Ok(())
}
