use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{log_joint, LatentModel};
use crate::simulate::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Sweeps over all blocks, burn-in included.
    pub n_iter: usize,
    /// Adaptation happens only here; these sweeps are discarded.
    pub burn_in: usize,
    pub thin: usize,
    /// Initial isotropic proposal SD per block (latent blocks, then the
    /// shared latent coordinates together with the hyperparameters). Empty
    /// means 0.1.
    pub scales: Vec<f64>,
    pub seed: u64,
    /// Sweeps between proposal updates during burn-in.
    pub adapt_window: usize,
    pub n_chains: usize,
    /// Largest `dim(chi) + dim(phi)` accepted.
    pub max_dim: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_iter: 20_000,
            burn_in: 5_000,
            thin: 1,
            scales: Vec::new(),
            seed: 1,
            adapt_window: 100,
            n_chains: 4,
            max_dim: 60,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self, n_blocks: usize) -> Result<()> {
        if self.n_iter <= self.burn_in {
            return Err(Error::Config("n_iter must exceed burn_in".into()));
        }
        if self.thin == 0 || self.adapt_window == 0 || self.n_chains == 0 {
            return Err(Error::Config("thin, adapt_window and n_chains must be positive".into()));
        }
        if !self.scales.is_empty() && self.scales.len() != n_blocks {
            return Err(Error::DimensionMismatch {
                context: "proposal scales".into(),
                expected: n_blocks,
                got: self.scales.len(),
            });
        }
        if self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("proposal scales must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Chain {
    /// Retained states `[chi, phi]`.
    pub draws: Vec<Vec<f64>>,
    /// Post-burn-in acceptance rate per block.
    pub acceptance: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct McmcOutput {
    pub names: Vec<String>,
    pub chains: Vec<Chain>,
}

impl McmcOutput {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.draws.iter().map(move |d| d[j])).collect()
    }

    pub fn mean(&self, j: usize) -> f64 {
        let c = self.column(j);
        c.iter().sum::<f64>() / c.len() as f64
    }

    pub fn sd(&self, j: usize) -> f64 {
        let c = self.column(j);
        let m = c.iter().sum::<f64>() / c.len() as f64;
        (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (c.len() as f64 - 1.0)).sqrt()
    }

    /// Monte Carlo standard error of the mean from per-chain batch means.
    pub fn mcse(&self, j: usize) -> f64 {
        let mut batches = Vec::new();
        for c in &self.chains {
            let n = c.draws.len();
            let b = (n as f64).sqrt().floor().max(1.0) as usize;
            for k in 0..n / b {
                batches.push(c.draws[k * b..(k + 1) * b].iter().map(|d| d[j]).sum::<f64>() / b as f64);
            }
        }
        let m = batches.iter().sum::<f64>() / batches.len() as f64;
        let v = batches.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches.len() as f64 - 1.0);
        (v / batches.len() as f64).sqrt()
    }

    pub fn rhat(&self, j: usize) -> f64 {
        let seqs: Vec<Vec<f64>> = self.chains.iter().map(|c| c.draws.iter().map(|d| d[j]).collect()).collect();
        split_rhat(&seqs)
    }

    pub fn max_rhat(&self) -> f64 {
        (0..self.names.len()).map(|j| self.rhat(j)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest and largest block acceptance rate over all chains.
    pub fn acceptance_range(&self) -> (f64, f64) {
        self.chains
            .iter()
            .flat_map(|c| c.acceptance.iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(a), hi.max(a)))
    }
}

/// Potential scale reduction with every chain split in half.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .collect();
    let n = halves[0].len() as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

struct Block {
    start: usize,
    dim: usize,
    log_scale: f64,
    chol: DMatrix<f64>,
    // running moments for adaptation
    count: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
    window_acc: usize,
    accepted: usize,
}

impl Block {
    fn new(start: usize, dim: usize, scale: f64) -> Self {
        Self {
            start,
            dim,
            log_scale: scale.ln(),
            chol: DMatrix::identity(dim, dim),
            count: 0.0,
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
            window_acc: 0,
            accepted: 0,
        }
    }

    fn record(&mut self, x: &[f64]) {
        let x = DVector::from_column_slice(&x[self.start..self.start + self.dim]);
        self.count += 1.0;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count;
        self.m2 += &delta * (&x - &self.mean).transpose();
    }

    fn adapt(&mut self, window: usize) {
        let rate = self.window_acc as f64 / window as f64;
        let target = if self.dim == 1 { 0.44 } else { 0.3 };
        self.log_scale += 2.0 * (rate - target);
        self.window_acc = 0;
        if self.count > 2.0 * self.dim as f64 + 10.0 {
            let mut cov = &self.m2 / (self.count - 1.0);
            let scale = cov.diagonal().amax().max(1e-12);
            cov += DMatrix::identity(self.dim, self.dim) * (1e-8 * scale);
            if let Some(c) = cov.cholesky() {
                // keep the overall size in log_scale
                let factor = 2.38 / (self.dim as f64).sqrt();
                self.chol = c.l() * factor;
                self.log_scale = self.log_scale.clamp(-5.0, 2.0);
            }
        }
    }
}

fn blocks_of(model: &impl LatentModel, scales: &[f64]) -> Vec<Block> {
    let (n, d, p, m) = (model.n_blocks(), model.block_dim(), model.border_dim(), model.hyper_dim());
    let mut spans = Vec::new();
    if d > 0 {
        spans.extend((0..n).map(|i| (i * d, d)));
    }
    // shared coefficients and hyperparameters are strongly correlated
    if p + m > 0 {
        spans.push((n * d, p + m));
    }
    spans
        .into_iter()
        .enumerate()
        .map(|(k, (s, dim))| Block::new(s, dim, scales.get(k).copied().unwrap_or(0.1)))
        .collect()
}

fn n_blocks_of(model: &impl LatentModel) -> usize {
    let d = model.block_dim();
    (if d > 0 { model.n_blocks() } else { 0 }) + usize::from(model.border_dim() + model.hyper_dim() > 0)
}

fn target(model: &impl LatentModel, x: &[f64], iteration: usize) -> Result<f64> {
    let nl = model.latent_dim();
    let chi = DVector::from_column_slice(&x[..nl]);
    let v = match log_joint(model, &chi, &x[nl..]) {
        Ok(v) => v,
        Err(Error::NonFinite { .. }) => f64::NAN,
        // outside the support of some component: reject
        Err(_) => f64::NEG_INFINITY,
    };
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::Divergence {
            iteration,
            state: x.to_vec(),
        });
    }
    Ok(v)
}

fn run_chain(model: &impl LatentModel, cfg: &ChainConfig, start: &[f64], stream: u64) -> Result<Chain> {
    let mut rng = rng_for(cfg.seed, stream);
    let mut blocks = blocks_of(model, &cfg.scales);
    let mut x = start.to_vec();
    let mut lp = target(model, &x, 0)?;
    if lp == f64::NEG_INFINITY {
        return Err(Error::Config("chain start lies outside the posterior support".into()));
    }
    let mut draws = Vec::with_capacity((cfg.n_iter - cfg.burn_in) / cfg.thin);
    for it in 0..cfg.n_iter {
        for b in blocks.iter_mut() {
            let z = DVector::from_fn(b.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let step = &b.chol * z * b.log_scale.exp();
            let mut cand = x.clone();
            for k in 0..b.dim {
                cand[b.start + k] += step[k];
            }
            let lc = target(model, &cand, it)?;
            if lc - lp >= rng.random::<f64>().ln() {
                x = cand;
                lp = lc;
                b.window_acc += 1;
                if it >= cfg.burn_in {
                    b.accepted += 1;
                }
            }
        }
        if it < cfg.burn_in {
            for b in blocks.iter_mut() {
                b.record(&x);
                if (it + 1) % cfg.adapt_window == 0 {
                    b.adapt(cfg.adapt_window);
                }
            }
        } else {
            for b in blocks.iter_mut() {
                b.window_acc = 0;
            }
            if (it - cfg.burn_in) % cfg.thin == 0 {
                draws.push(x.clone());
            }
        }
    }
    let kept = (cfg.n_iter - cfg.burn_in) as f64;
    Ok(Chain {
        draws,
        acceptance: blocks.iter().map(|b| b.accepted as f64 / kept).collect(),
    })
}

/// Blockwise adaptive random-walk Metropolis over `(chi, phi)` targeting
/// [`log_joint`]. Blocks are each latent block, then the shared latent
/// coordinates with the hyperparameters. Proposals adapt to the running
/// covariance during burn-in only, so retained draws come from a fixed
/// kernel. Chains run concurrently on independent streams.
pub fn mh_sample(model: &impl LatentModel, cfg: &ChainConfig, start: Option<(&DVector<f64>, &[f64])>) -> Result<McmcOutput> {
    let dim = model.latent_dim() + model.hyper_dim();
    if dim > cfg.max_dim {
        return Err(Error::Config(format!("sampler limited to {} unknowns, model has {dim}", cfg.max_dim)));
    }
    cfg.validate(n_blocks_of(model))?;
    let mut x0: Vec<f64> = match start {
        Some((chi, _)) => chi.iter().copied().collect(),
        None => model.initial_latent().iter().copied().collect(),
    };
    match start {
        Some((_, phi)) => x0.extend_from_slice(phi),
        None => x0.extend(model.initial_hyper()),
    }
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "chain start".into(),
            expected: dim,
            got: x0.len(),
        });
    }
    let chains = (0..cfg.n_chains as u64)
        .into_par_iter()
        .map(|c| run_chain(model, cfg, &x0, c))
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<String> = (0..model.latent_dim()).map(|j| format!("chi_{j}")).collect();
    names.extend(model.hyper_names());
    Ok(McmcOutput { names, chains })
}
