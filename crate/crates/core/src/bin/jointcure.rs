use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use jointcure::harness::{rerun, run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "jointcure", version, about = "Joint longitudinal count and cure-survival models")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Verb {
    /// Simulate a cohort in the ingestion schema.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit the joint model and write the report tables.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        longitudinal: Option<PathBuf>,
        #[arg(long)]
        survival: Option<PathBuf>,
    },
    /// Monte Carlo study of bias and coverage.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Worker threads (0: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Kaplan-Meier curves of a survival file.
    Km {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        survival: Option<PathBuf>,
        /// Survival column to split by.
        #[arg(long)]
        group: Option<String>,
    },
    /// Repeat a run from its manifest.json.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load(common: &Common) -> jointcure::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(verb: Verb) -> jointcure::Result<bool> {
    let (command, cfg, out_dir) = match verb {
        Verb::Rerun { manifest, out_dir } => {
            let r = rerun(&manifest, &out_dir)?;
            for f in &r.mismatched {
                eprintln!("output differs from the recorded run: {f}");
            }
            return Ok(r.mismatched.is_empty());
        }
        Verb::Simulate { common, scenario, n } => {
            let mut cfg = load(&common)?;
            cfg.simulate.scenario = scenario.unwrap_or(cfg.simulate.scenario);
            cfg.simulate.n = n.unwrap_or(cfg.simulate.n);
            (Command::Simulate, cfg, common.out_dir)
        }
        Verb::Fit { common, longitudinal, survival } => {
            let mut cfg = load(&common)?;
            cfg.data.longitudinal = longitudinal.or(cfg.data.longitudinal);
            cfg.data.survival = survival.or(cfg.data.survival);
            (Command::Fit, cfg, common.out_dir)
        }
        Verb::Mc { common, scenario, n, replicates, threads } => {
            let mut cfg = load(&common)?;
            cfg.mc.scenario = scenario.unwrap_or(cfg.mc.scenario);
            cfg.mc.n = n.unwrap_or(cfg.mc.n);
            cfg.mc.replicates = replicates.unwrap_or(cfg.mc.replicates);
            cfg.mc.threads = threads.unwrap_or(cfg.mc.threads);
            (Command::Mc, cfg, common.out_dir)
        }
        Verb::Km { common, survival, group } => {
            let mut cfg = load(&common)?;
            cfg.data.survival = survival.or(cfg.data.survival);
            cfg.data.group = group.or(cfg.data.group);
            (Command::Km, cfg, common.out_dir)
        }
    };
    let m = run(command, &cfg, &out_dir)?;
    for f in &m.outputs {
        eprintln!("wrote {}", out_dir.join(&f.path).display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = execute(cli.verb);
    eprintln!("elapsed {:.2?}", start.elapsed());
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
