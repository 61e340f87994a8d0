//! The `simulate`, `fit`, `mc` and `km` workflows and their manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::ingest::{ingest, ingest_survival, IngestSummary};
use super::mc::{run_mc, write_report};
use super::report;
use crate::error::{Error, Result};
use crate::inference::{fit, AlphaSupport, ParameterSummary};
use crate::kmsurv::{self, kaplan_meier, kaplan_meier_by_group, KmCurve};
use crate::simulate::{rng_for, simulate_dataset, simulation_spec, ScenarioConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Fit,
    Mc,
    Km,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub inputs: Vec<FileHash>,
    /// Files written to the output directory, by name.
    pub outputs: Vec<FileHash>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plateau {
    pub group: String,
    pub value: f64,
    pub informative: bool,
}

/// Contents of `summary.json` after a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub data: IngestSummary,
    pub alpha_support: AlphaSupport,
    pub prob_alpha_negative: f64,
    pub hazard_ratios: Vec<ParameterSummary>,
    pub hyper_mode: Vec<f64>,
    pub grid_points: usize,
    pub grid_failed: usize,
    pub search_iterations: usize,
    pub n_draws: usize,
    pub km_plateaus: Vec<Plateau>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        fs::write(self.dir.join(name), buf)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn hashes(&self) -> Result<Vec<FileHash>> {
        let mut names = self.files.clone();
        names.sort();
        names
            .into_iter()
            .map(|n| {
                Ok(FileHash {
                    sha256: sha256_file(&self.dir.join(&n))?,
                    path: n,
                })
            })
            .collect()
    }
}

fn canonical(p: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    p.as_ref()
        .map(|p| {
            fs::canonicalize(p).map_err(|e| Error::Input {
                file: p.display().to_string(),
                line: 0,
                message: e.to_string(),
            })
        })
        .transpose()
}

fn km_curves(times: &[f64], events: &[bool], groups: Option<&[String]>) -> Result<Vec<KmCurve>> {
    match groups {
        Some(g) => kaplan_meier_by_group(times, events, g),
        None => Ok(vec![kaplan_meier(times, events)?]),
    }
}

fn plateaus(curves: &[KmCurve]) -> Vec<Plateau> {
    curves
        .iter()
        .map(|c| {
            let p = kmsurv::plateau(c);
            Plateau {
                group: c.group.clone().unwrap_or_else(|| "all".into()),
                value: p.value,
                informative: p.informative,
            }
        })
        .collect()
}

/// Runs `command` and writes its files plus `manifest.json` to `out_dir`.
pub fn run(command: Command, config: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    config.validate()?;
    let mut cfg = config.clone();
    let mut inputs = Vec::new();
    if matches!(command, Command::Fit | Command::Km) {
        cfg.data.survival = canonical(&cfg.data.survival)?;
        if command == Command::Fit {
            cfg.data.longitudinal = canonical(&cfg.data.longitudinal)?;
            inputs.push(cfg.longitudinal_path()?.to_path_buf());
        }
        inputs.push(cfg.survival_path()?.to_path_buf());
    }
    let mut out = Outputs::new(out_dir)?;
    match command {
        Command::Simulate => simulate_cmd(&cfg, &mut out)?,
        Command::Fit => fit_cmd(&cfg, &mut out)?,
        Command::Mc => {
            let m = &cfg.mc;
            let rep = run_mc(m.scenario, m.n, m.replicates, cfg.seed, m.threads, &cfg.priors, &cfg.inference)?;
            if rep.failed == rep.replicates {
                return Err(Error::HyperNonconvergence(format!("all {} replicates failed", rep.replicates)));
            }
            out.write("mc_report.csv", |w| write_report(&rep, w))?;
        }
        Command::Km => {
            let s = ingest_survival(&cfg)?;
            let curves = km_curves(&s.times, &s.events, s.groups.as_deref())?;
            out.write("km_curves.csv", |w| kmsurv::write_csv(&curves, w))?;
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: cfg,
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(FileHash {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_>>()?,
        outputs: out.hashes()?,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out_dir.join(MANIFEST), text)?;
    Ok(manifest)
}

fn simulate_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let sc = ScenarioConfig::by_id(cfg.simulate.scenario, cfg.simulate.n, cfg.seed)?;
    let data = simulate_dataset(&sc)?;
    out.write("longitudinal.csv", |w| report::write_simulated_longitudinal(&data, w))?;
    out.write("survival.csv", |w| report::write_simulated_survival(&data, w))?;
    out.write("latent_truth.csv", |w| report::write_latent_truth(&data, w))?;
    // ready-made config for fitting the cohort
    let spec = simulation_spec();
    let mut fit_cfg = cfg.clone();
    fit_cfg.data.longitudinal = Some("longitudinal.csv".into());
    fit_cfg.data.survival = Some("survival.csv".into());
    fit_cfg.data.group = Some("x1".into());
    fit_cfg.biomarkers = spec.biomarkers().to_vec();
    fit_cfg.survival.covariates = spec.survival_covariates().to_vec();
    let text = fit_cfg.to_toml()?;
    out.write("config.toml", |w| {
        w.extend_from_slice(text.as_bytes());
        Ok(())
    })
}

fn fit_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let data = ingest(cfg)?;
    let groups = data.groups.as_deref();
    let f = fit(&data.spec, &data.subjects, &cfg.priors, &cfg.inference)?;
    let draws = f.sample(cfg.inference.n_draws, &mut rng_for(cfg.seed, 0));
    let summary = f.summarize(&draws, groups)?;
    let times: Vec<f64> = data.subjects.iter().map(|s| s.observed_time).collect();
    let events: Vec<bool> = data.subjects.iter().map(|s| s.event).collect();
    let km = km_curves(&times, &events, groups)?;
    let grid = cfg.curves.resolve(times.iter().copied().fold(0.0, f64::max));
    let curves = f.survival_curves(&draws, groups, &grid)?;

    let mut params = summary.parameters.clone();
    params.extend(summary.hazard_ratios.iter().cloned());
    out.write("parameters.csv", |w| report::write_parameters(&params, w))?;
    out.write("cure_fractions.csv", |w| report::write_cure_fractions(&summary.cure, w))?;
    out.write("group_cure.csv", |w| report::write_group_cure(&summary.groups, w))?;
    out.write("km_curves.csv", |w| kmsurv::write_csv(&km, w))?;
    out.write("model_curves.csv", |w| report::write_model_curves(&curves, w))?;
    let rep = FitReport {
        data: data.summary(),
        alpha_support: cfg.inference.alpha_support,
        prob_alpha_negative: summary.prob_alpha_negative,
        hazard_ratios: summary.hazard_ratios.clone(),
        hyper_mode: f.grid.hyper_mode.clone(),
        grid_points: f.grid.points.len(),
        grid_failed: f.grid.n_failed,
        search_iterations: f.grid.search_iterations,
        n_draws: summary.n_draws,
        km_plateaus: plateaus(&km),
    };
    out.write("summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &rep)?;
        w.push(b'\n');
        Ok(())
    })
}

/// Result of repeating a run from its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Rerun {
    pub manifest: Manifest,
    /// Outputs whose hash differs from the original run.
    pub mismatched: Vec<String>,
}

/// Repeats the run recorded in `manifest_path` into `out_dir`. Inputs must
/// still hash to the recorded values.
pub fn rerun(manifest_path: &Path, out_dir: &Path) -> Result<Rerun> {
    let old = Manifest::load(manifest_path)?;
    for f in &old.inputs {
        let now = sha256_file(Path::new(&f.path)).map_err(|e| Error::Input {
            file: f.path.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        if now != f.sha256 {
            return Err(Error::Input {
                file: f.path.clone(),
                line: 0,
                message: "contents changed since the manifest was written".into(),
            });
        }
    }
    let manifest = run(old.command, &old.config, out_dir)?;
    let mismatched = old
        .outputs
        .iter()
        .filter(|o| !manifest.outputs.contains(o))
        .map(|o| o.path.clone())
        .collect();
    Ok(Rerun { manifest, mismatched })
}
