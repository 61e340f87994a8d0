//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [data]
//! longitudinal = "long.csv"
//! survival = "surv.csv"
//! group = "drug"
//! encode = { drug = { CBZ = 0, LTG = 1 } }
//!
//! [[biomarker]]
//! name = "qol"
//! fixed = ["intercept", "time", "drug"]
//! random = ["intercept", "time"]
//!
//! [survival]
//! covariates = ["drug"]
//! ```
//!
//! Every section is optional; relative paths resolve against the directory
//! of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{FitOptions, PriorSpec};
use crate::model::{BiomarkerSpec, JointModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    #[serde(rename = "biomarker")]
    pub biomarkers: Vec<BiomarkerSpec>,
    pub survival: SurvivalConfig,
    pub priors: PriorSpec,
    pub inference: FitOptions,
    pub simulate: SimulateConfig,
    pub mc: McConfig,
    pub curves: CurveConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            data: DataConfig::default(),
            biomarkers: Vec::new(),
            survival: SurvivalConfig::default(),
            priors: PriorSpec::default(),
            inference: FitOptions::default(),
            simulate: SimulateConfig::default(),
            mc: McConfig::default(),
            curves: CurveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub longitudinal: Option<PathBuf>,
    pub survival: Option<PathBuf>,
    /// Survival column whose raw value labels the subject's group.
    pub group: Option<String>,
    /// Numeric codes of categorical covariates, per column.
    pub encode: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivalConfig {
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: u32,
    pub n: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { scenario: 1, n: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub scenario: u32,
    pub n: usize,
    pub replicates: usize,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            scenario: 1,
            n: 500,
            replicates: 100,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    /// Evaluation times of the model curves; empty spreads `n_points`
    /// evenly over `[0, max observed time]`.
    pub times: Vec<f64>,
    pub n_points: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            n_points: 50,
        }
    }
}

impl CurveConfig {
    pub fn resolve(&self, max_time: f64) -> Vec<f64> {
        if !self.times.is_empty() {
            return self.times.clone();
        }
        let k = self.n_points.max(2);
        (0..k).map(|i| max_time * i as f64 / (k - 1) as f64).collect()
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data.longitudinal = cfg.data.longitudinal.map(|p| base.join(p));
        cfg.data.survival = cfg.data.survival.map(|p| base.join(p));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model_spec(&self) -> Result<JointModelSpec> {
        JointModelSpec::new(self.biomarkers.clone(), self.survival.covariates.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.curves.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Config(format!("curve time {t} must be finite and >= 0")));
        }
        if self.inference.n_draws == 0 {
            return Err(Error::Config("inference.n_draws must be >= 1".into()));
        }
        if self.mc.replicates == 0 {
            return Err(Error::Config("mc.replicates must be >= 1".into()));
        }
        Ok(())
    }

    pub fn longitudinal_path(&self) -> Result<&Path> {
        self.data
            .longitudinal
            .as_deref()
            .ok_or_else(|| Error::Config("data.longitudinal is not set".into()))
    }

    pub fn survival_path(&self) -> Result<&Path> {
        self.data
            .survival
            .as_deref()
            .ok_or_else(|| Error::Config("data.survival is not set".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            r#"
seed = 7
[data]
longitudinal = "l.csv"
survival = "s.csv"
group = "drug"
encode = { drug = { CBZ = 0, LTG = 1 } }
[[biomarker]]
name = "qol"
fixed = ["intercept", "time", "drug"]
random = ["intercept"]
[survival]
covariates = ["drug"]
[priors]
tau_beta = 0.1
[inference]
n_draws = 200
alpha_support = "positive"
[inference.explore]
strategy = "grid"
[mc]
replicates = 5
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.data.encode["drug"]["LTG"], 1.0);
        assert_eq!(cfg.biomarkers[0].fixed.len(), 3);
        assert_eq!(cfg.priors.tau_beta, 0.1);
        assert_eq!(cfg.priors.tau_psi, 0.01);
        assert_eq!(cfg.inference.n_draws, 200);
        assert_eq!(cfg.mc.replicates, 5);
        assert_eq!(cfg.mc.n, 500);
        assert_eq!(cfg.model_spec().unwrap().theta_dim(), 3 + 1 + 1 + 1 + 1);
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn typos_are_config_errors() {
        let e = RunConfig::from_toml("[priors]\ntau_bta = 1.0\n").unwrap_err();
        assert!(e.is_input_error(), "{e}");
        assert!(RunConfig::from_toml("sed = 3").is_err());
    }

    #[test]
    fn curve_times() {
        let c = CurveConfig {
            times: vec![],
            n_points: 5,
        };
        assert_eq!(c.resolve(2.0), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
