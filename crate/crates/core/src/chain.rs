//! The partially collapsed Gibbs sampler and its posterior summaries.
//!
//! Per iteration the blocks run in a fixed order: model step, g step
//! (hyper-g/n only), `sigma^2`, `alpha`, `beta_k`, then the latent sweep.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, CenteredDesign, Dataset, Family, Standardize};
use crate::error::{ChainError, ConfigError, GaussianError};
use crate::g_prior::{mh_g_step, GAdaptState, GPrior};
use crate::latent::{update_all_latents, LatentAdaptState};
use crate::likelihood::PointLik;
use crate::linear_gaussian::{sample_alpha, LatentSummary, ModelSuffStats};
use crate::model::ModelIndicator;
use crate::model_space::{model_mh_step, ModelPrior};
use crate::rng::{master_rng, observation_rngs, ChainRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub store_z: bool,
    pub store_beta: bool,
    /// Worker threads for the latent sweep; 1 keeps everything on the caller's thread.
    pub threads: usize,
    pub standardize: Standardize,
    /// Holds `sigma^2` at this value instead of sampling it.
    pub sigma2_pinned: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iter: 550_000,
            burn_in: 250_000,
            thin: 1,
            seed: 1,
            store_z: false,
            store_beta: false,
            threads: 1,
            standardize: Standardize::Center,
            sigma2_pinned: None,
        }
    }
}

impl ChainConfig {
    /// Short-run config with burn-in at half the iterations.
    pub fn with_iters(n_iter: usize, seed: u64) -> Self {
        ChainConfig {
            n_iter,
            burn_in: n_iter / 2,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.burn_in >= self.n_iter {
            return Err(ConfigError::Chain(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(ConfigError::Chain("thin must be at least 1".into()));
        }
        if let Some(s) = self.sigma2_pinned {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ConfigError::Chain(format!("pinned sigma2 must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn n_kept(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub gprior: GPrior,
    /// Prior expected model size; `p / 2` when absent.
    pub m: Option<f64>,
}

impl PriorConfig {
    pub fn new(gprior: GPrior, m: Option<f64>) -> Self {
        PriorConfig { gprior, m }
    }

    pub fn expected_size(&self, p: usize) -> f64 {
        self.m.unwrap_or(p as f64 / 2.0)
    }

    pub fn model_prior(&self, p: usize) -> Result<ModelPrior, ConfigError> {
        ModelPrior::new(p, self.expected_size(p))
    }
}

/// Full sampler state. `beta` has length `p` with zeros outside the model.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLayerState {
    pub z: Vec<f64>,
    pub model: ModelIndicator,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub g: f64,
}

/// Starting latent values from the counts.
pub fn initial_latent(data: &Dataset) -> Vec<f64> {
    data.y()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let y = y as f64;
            match data.family() {
                Family::Pln => (y + 0.5).ln(),
                Family::Bil => {
                    let n = data.trials_at(i) as f64;
                    let p = (y + 0.5) / (n + 1.0);
                    (p / (1.0 - p)).ln()
                }
                Family::Nbl { r } => ((r as f64 + 0.5) / (y + 0.5)).ln(),
            }
        })
        .collect()
}

/// Null model, `alpha = z_bar`, `beta = 0`, `sigma^2 = 1` (or the pinned value).
pub fn init_chain(
    data: &Dataset,
    prior: &PriorConfig,
    config: &ChainConfig,
) -> Result<GaussianLayerState, ChainError> {
    validate_dataset(data)?;
    prior.gprior.validate()?;
    let z = initial_latent(data);
    let alpha = z.iter().sum::<f64>() / z.len() as f64;
    Ok(GaussianLayerState {
        model: ModelIndicator::empty(data.p()),
        alpha,
        beta: vec![0.0; data.p()],
        sigma2: config.sigma2_pinned.unwrap_or(1.0),
        g: prior.gprior.initial_g(data.n()),
        z,
    })
}

/// Location and spread of one scalar parameter's kept draws.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
}

impl ScalarSummary {
    pub fn from_draws(draws: &[f64]) -> Self {
        if draws.is_empty() {
            return ScalarSummary::default();
        }
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| quantile_sorted(&sorted, p);
        ScalarSummary {
            mean,
            sd: var.sqrt(),
            q025: q(0.025),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q975: q(0.975),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One stored posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub alpha: f64,
    pub sigma2: f64,
    pub g: f64,
    pub model: ModelIndicator,
    /// Full-length coefficients (empty unless betas are stored).
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub model: f64,
    pub g: f64,
    pub latent: f64,
}

/// Running sums over kept draws; mergeable across chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    p: usize,
    n_kept: usize,
    incl: Vec<u64>,
    beta_sum: Vec<f64>,
    beta_sq: Vec<f64>,
    alpha: Vec<f64>,
    sigma2: Vec<f64>,
    g: Vec<f64>,
    size_hist: Vec<u64>,
    visits: HashMap<ModelIndicator, u64>,
    accept: [u64; 3],
    trials: [u64; 3],
    draws: Vec<Draw>,
    z_draws: Vec<Vec<f64>>,
}

impl Accumulator {
    pub fn new(p: usize) -> Self {
        Accumulator {
            p,
            n_kept: 0,
            incl: vec![0; p],
            beta_sum: vec![0.0; p],
            beta_sq: vec![0.0; p],
            alpha: Vec::new(),
            sigma2: Vec::new(),
            g: Vec::new(),
            size_hist: vec![0; p + 1],
            visits: HashMap::new(),
            accept: [0; 3],
            trials: [0; 3],
            draws: Vec::new(),
            z_draws: Vec::new(),
        }
    }

    /// Adds one kept state.
    pub fn record(&mut self, state: &GaussianLayerState) {
        self.n_kept += 1;
        for &j in state.model.included() {
            self.incl[j] += 1;
            let b = state.beta[j];
            self.beta_sum[j] += b;
            self.beta_sq[j] += b * b;
        }
        self.alpha.push(state.alpha);
        self.sigma2.push(state.sigma2);
        self.g.push(state.g);
        self.size_hist[state.model.size()] += 1;
        *self.visits.entry(state.model.clone()).or_insert(0) += 1;
    }

    pub fn store_draw(&mut self, iteration: usize, state: &GaussianLayerState, beta: bool, z: bool) {
        self.draws.push(Draw {
            iteration,
            alpha: state.alpha,
            sigma2: state.sigma2,
            g: state.g,
            model: state.model.clone(),
            beta: if beta { state.beta.clone() } else { Vec::new() },
        });
        if z {
            self.z_draws.push(state.z.clone());
        }
    }

    /// Counts acceptances for the model, g and latent blocks.
    pub fn record_acceptance(&mut self, block: usize, accepted: u64, tried: u64) {
        self.accept[block] += accepted;
        self.trials[block] += tried;
    }

    pub fn merge(&mut self, other: Accumulator) {
        assert_eq!(self.p, other.p, "cannot merge accumulators of different width");
        self.n_kept += other.n_kept;
        for j in 0..self.p {
            self.incl[j] += other.incl[j];
            self.beta_sum[j] += other.beta_sum[j];
            self.beta_sq[j] += other.beta_sq[j];
        }
        self.alpha.extend(other.alpha);
        self.sigma2.extend(other.sigma2);
        self.g.extend(other.g);
        for (a, b) in self.size_hist.iter_mut().zip(other.size_hist) {
            *a += b;
        }
        for (m, c) in other.visits {
            *self.visits.entry(m).or_insert(0) += c;
        }
        for b in 0..3 {
            self.accept[b] += other.accept[b];
            self.trials[b] += other.trials[b];
        }
        self.draws.extend(other.draws);
        self.z_draws.extend(other.z_draws);
    }

    pub fn n_kept(&self) -> usize {
        self.n_kept
    }
}

/// Posterior summaries of one or more merged chains.
///
/// Coefficient summaries are on the scale of the transformed design and
/// average over inclusion (excluded draws count as zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub p: usize,
    pub n_kept: usize,
    pub pip: Vec<f64>,
    pub beta_mean: Vec<f64>,
    pub beta_sd: Vec<f64>,
    pub alpha: ScalarSummary,
    pub sigma2: ScalarSummary,
    pub g: ScalarSummary,
    /// Kept draws of model size `k` at index `k`.
    pub size_hist: Vec<u64>,
    /// Visited models with visit counts, most frequent first.
    pub models: Vec<(ModelIndicator, u64)>,
    pub acceptance: AcceptanceRates,
    pub draws: Vec<Draw>,
    pub z_draws: Vec<Vec<f64>>,
    pub col_means: Vec<f64>,
    pub col_scales: Vec<f64>,
    pub standardize: Standardize,
}

impl ChainOutput {
    pub fn mean_model_size(&self) -> f64 {
        let total: u64 = self.size_hist.iter().sum();
        let s: u64 = self.size_hist.iter().enumerate().map(|(k, &c)| k as u64 * c).sum();
        s as f64 / total as f64
    }

    pub fn size_pmf(&self) -> Vec<f64> {
        let total: u64 = self.size_hist.iter().sum();
        self.size_hist.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// Fraction of kept draws in exactly `model`.
    pub fn model_frequency(&self, model: &ModelIndicator) -> f64 {
        self.models
            .iter()
            .find(|(m, _)| m == model)
            .map_or(0.0, |(_, c)| *c as f64 / self.n_kept as f64)
    }

    pub fn top_models(&self, k: usize) -> impl Iterator<Item = (&ModelIndicator, f64)> {
        self.models
            .iter()
            .take(k)
            .map(move |(m, c)| (m, *c as f64 / self.n_kept as f64))
    }

    /// Maps a raw covariate row onto the fitted design's scale.
    pub fn transform_row(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.col_means.iter().zip(&self.col_scales))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }
}

/// Turns accumulated draws into posterior summaries.
///
/// # Panics
/// If no draw was recorded.
pub fn summarize(acc: Accumulator, design: &CenteredDesign) -> ChainOutput {
    assert!(acc.n_kept > 0, "summaries need at least one kept draw");
    let nk = acc.n_kept as f64;
    let pip = acc.incl.iter().map(|&c| c as f64 / nk).collect();
    let beta_mean: Vec<f64> = acc.beta_sum.iter().map(|s| s / nk).collect();
    let beta_sd = acc
        .beta_sq
        .iter()
        .zip(&beta_mean)
        .map(|(sq, m)| (sq / nk - m * m).max(0.0).sqrt())
        .collect();
    let mut models: Vec<(ModelIndicator, u64)> = acc.visits.into_iter().collect();
    models.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let rate = |b: usize| {
        if acc.trials[b] == 0 {
            0.0
        } else {
            acc.accept[b] as f64 / acc.trials[b] as f64
        }
    };
    ChainOutput {
        p: acc.p,
        n_kept: acc.n_kept,
        pip,
        beta_mean,
        beta_sd,
        alpha: ScalarSummary::from_draws(&acc.alpha),
        sigma2: ScalarSummary::from_draws(&acc.sigma2),
        g: ScalarSummary::from_draws(&acc.g),
        size_hist: acc.size_hist,
        models,
        acceptance: AcceptanceRates {
            model: rate(0),
            g: rate(1),
            latent: rate(2),
        },
        draws: acc.draws,
        z_draws: acc.z_draws,
        col_means: design.col_means().to_vec(),
        col_scales: design.col_scales().to_vec(),
        standardize: design.mode(),
    }
}

fn check(v: f64, iteration: usize, what: &'static str) -> Result<(), ChainError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ChainError::NonFinite { iteration, what })
    }
}

fn gaussian(iteration: usize) -> impl Fn(GaussianError) -> ChainError {
    move |source| ChainError::Gaussian { iteration, source }
}

/// A running sampler. Most callers want [`run_chain`].
pub struct Sampler<'a> {
    design: CenteredDesign,
    liks: Vec<PointLik>,
    model_prior: ModelPrior,
    gprior: GPrior,
    config: &'a ChainConfig,
    state: GaussianLayerState,
    summary: LatentSummary,
    current: ModelSuffStats,
    latent_adapt: LatentAdaptState,
    g_adapt: GAdaptState,
    rng: ChainRng,
    obs_rngs: Vec<ChainRng>,
    means: Vec<f64>,
    accepted: Vec<bool>,
    pool: Option<rayon::ThreadPool>,
    iteration: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &Dataset, prior: &PriorConfig, config: &'a ChainConfig) -> Result<Self, ChainError> {
        config.validate()?;
        let state = init_chain(data, prior, config)?;
        let model_prior = prior.model_prior(data.p())?;
        let design = CenteredDesign::new(data.x(), config.standardize);
        let liks = (0..data.n())
            .map(|i| PointLik::new(data.family(), data.y()[i], data.trials_at(i)))
            .collect();
        let summary = LatentSummary::new(&state.z, &design);
        let current = ModelSuffStats::new(&summary, &state.model, &design).map_err(gaussian(0))?;
        let pool = if config.threads > 1 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .ok()
        } else {
            None
        };
        Ok(Sampler {
            liks,
            model_prior,
            gprior: prior.gprior,
            config,
            summary,
            current,
            latent_adapt: LatentAdaptState::new(data.n()),
            g_adapt: GAdaptState::default(),
            rng: master_rng(config.seed),
            obs_rngs: observation_rngs(config.seed, data.n()),
            means: vec![0.0; data.n()],
            accepted: Vec::with_capacity(data.n()),
            pool,
            iteration: 0,
            design,
            state,
        })
    }

    pub fn state(&self) -> &GaussianLayerState {
        &self.state
    }

    pub fn design(&self) -> &CenteredDesign {
        &self.design
    }

    fn log_marginal(&self, s: &ModelSuffStats, g: f64) -> f64 {
        match self.config.sigma2_pinned {
            Some(s2) => s.log_marginal_fixed_sigma2(g, s2),
            None => s.log_marginal(g),
        }
    }

    /// Runs one full sweep; returns `(model accepted, g accepted, latent acceptances)`.
    pub fn step(&mut self) -> Result<(bool, Option<bool>, usize), ChainError> {
        self.iteration += 1;
        let it = self.iteration;
        let g = self.state.g;

        // model
        let current_lm = self.log_marginal(&self.current, g);
        let mut proposed: Option<ModelSuffStats> = None;
        let design = &self.design;
        let summary = &self.summary;
        let pinned = self.config.sigma2_pinned;
        let mut degenerate = false;
        let step = model_mh_step(
            &mut self.state.model,
            current_lm,
            &self.model_prior,
            |m| match ModelSuffStats::new(summary, m, design) {
                Ok(s) => {
                    let lm = match pinned {
                        Some(s2) => s.log_marginal_fixed_sigma2(g, s2),
                        None => s.log_marginal(g),
                    };
                    proposed = Some(s);
                    Some(lm)
                }
                Err(GaussianError::RankDeficient) => None,
                Err(GaussianError::DegenerateZ) => {
                    degenerate = true;
                    None
                }
            },
            &mut self.rng,
        );
        if degenerate {
            return Err(ChainError::Gaussian {
                iteration: it,
                source: GaussianError::DegenerateZ,
            });
        }
        if step.accepted {
            self.current = proposed.expect("accepted proposal was evaluated");
        }

        // g
        let mut g_acc = None;
        if let GPrior::HyperGOverN { a } = self.gprior {
            let cur = &self.current;
            let lm = |v: f64| match pinned {
                Some(s2) => cur.log_marginal_fixed_sigma2(v, s2),
                None => cur.log_marginal(v),
            };
            let gs = mh_g_step(g, lm(g), lm, a, self.design.n(), &mut self.g_adapt, &mut self.rng);
            self.state.g = gs.g;
            g_acc = Some(gs.accepted);
            check(self.state.g, it, "g")?;
        }
        let g = self.state.g;

        // sigma2, alpha, beta
        if pinned.is_none() {
            self.state.sigma2 = self.current.sample_sigma2(g, &mut self.rng);
            if !(self.state.sigma2 > 0.0) {
                return Err(ChainError::NonFinite { iteration: it, what: "sigma2" });
            }
            check(self.state.sigma2, it, "sigma2")?;
        }
        let n = self.design.n();
        self.state.alpha = sample_alpha(self.summary.zbar, self.state.sigma2, n, &mut self.rng);
        check(self.state.alpha, it, "alpha")?;
        let bk = self.current.sample_beta(self.state.sigma2, g, &mut self.rng);
        self.state.beta.iter_mut().for_each(|b| *b = 0.0);
        for (&j, &b) in self.current.cols().iter().zip(bk.iter()) {
            check(b, it, "beta")?;
            self.state.beta[j] = b;
        }

        // latent
        let xc = self.design.xc();
        self.means.iter_mut().for_each(|m| *m = self.state.alpha);
        for (&j, &b) in self.current.cols().iter().zip(bk.iter()) {
            for (m, x) in self.means.iter_mut().zip(xc.column(j).iter()) {
                *m += x * b;
            }
        }
        let sigma2 = self.state.sigma2;
        let (z, liks, means, adapt, rngs, acc) = (
            &mut self.state.z,
            &self.liks,
            &self.means,
            &mut self.latent_adapt,
            &mut self.obs_rngs,
            &mut self.accepted,
        );
        let n_acc = match &self.pool {
            Some(pool) => pool.install(|| update_all_latents(z, liks, means, sigma2, adapt, rngs, acc, true)),
            None => update_all_latents(z, liks, means, sigma2, adapt, rngs, acc, false),
        };
        self.summary = LatentSummary::new(&self.state.z, &self.design);
        check(self.summary.tss, it, "latent z")?;
        check(self.summary.zbar, it, "latent z")?;
        self.current = ModelSuffStats::with_factor(&self.summary, self.current.factor().clone());
        if self.summary.tss < crate::linear_gaussian::TSS_MIN {
            return Err(ChainError::Gaussian {
                iteration: it,
                source: GaussianError::DegenerateZ,
            });
        }
        Ok((step.accepted, g_acc, n_acc))
    }

    /// Stops adapting step sizes.
    pub fn freeze_adaptation(&mut self) {
        self.latent_adapt.freeze();
        self.g_adapt.frozen = true;
    }

    pub fn latent_steps(&self) -> Vec<f64> {
        self.latent_adapt.log_step.iter().map(|l| l.exp()).collect()
    }

    pub fn g_proposal_variance(&self) -> f64 {
        self.g_adapt.tau()
    }
}

/// Runs one chain and summarizes the kept draws.
pub fn run_chain(data: &Dataset, prior: &PriorConfig, config: &ChainConfig) -> Result<ChainOutput, ChainError> {
    let (acc, design) = run_chain_raw(data, prior, config)?;
    Ok(summarize(acc, &design))
}

/// Like [`run_chain`] but returns the unsummarized accumulator.
pub fn run_chain_raw(
    data: &Dataset,
    prior: &PriorConfig,
    config: &ChainConfig,
) -> Result<(Accumulator, CenteredDesign), ChainError> {
    let mut sampler = Sampler::new(data, prior, config)?;
    let mut acc = Accumulator::new(data.p());
    let n = data.n() as u64;
    for it in 1..=config.n_iter {
        if it == config.burn_in + 1 {
            sampler.freeze_adaptation();
        }
        let (m_acc, g_acc, z_acc) = sampler.step()?;
        if it > config.burn_in {
            acc.record_acceptance(0, m_acc as u64, 1);
            if let Some(a) = g_acc {
                acc.record_acceptance(1, a as u64, 1);
            }
            acc.record_acceptance(2, z_acc as u64, n);
            if (it - config.burn_in - 1) % config.thin == 0 {
                acc.record(sampler.state());
                if config.store_beta || config.store_z {
                    acc.store_draw(it, sampler.state(), config.store_beta, config.store_z);
                }
            }
        }
    }
    Ok((acc, sampler.design.clone()))
}

/// Runs `chains` chains with seeds `seed, seed + 1, ...` and merges them.
///
/// With several chains, `config.threads` caps how many run at once and each
/// chain's latent sweep stays single-threaded.
pub fn run_chains(
    data: &Dataset,
    prior: &PriorConfig,
    config: &ChainConfig,
    chains: usize,
) -> Result<ChainOutput, ChainError> {
    let chains = chains.max(1);
    if chains == 1 {
        return run_chain(data, prior, config);
    }
    let configs: Vec<ChainConfig> = (0..chains)
        .map(|c| ChainConfig {
            seed: config.seed.wrapping_add(c as u64),
            threads: 1,
            ..config.clone()
        })
        .collect();
    let mut results = Vec::with_capacity(chains);
    for batch in configs.chunks(config.threads.max(1)) {
        let done: Vec<Result<(Accumulator, CenteredDesign), ChainError>> = std::thread::scope(|s| {
            let handles: Vec<_> = batch
                .iter()
                .map(|cfg| s.spawn(move || run_chain_raw(data, prior, cfg)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("chain thread panicked"))
                .collect()
        });
        results.extend(done);
    }
    let mut merged: Option<(Accumulator, CenteredDesign)> = None;
    for r in results {
        let (acc, design) = r?;
        match merged.as_mut() {
            None => merged = Some((acc, design)),
            Some((m, _)) => m.merge(acc),
        }
    }
    let (acc, design) = merged.expect("at least one chain");
    Ok(summarize(acc, &design))
}

/// Dense `n x p` matrix of coefficient draws (rows = stored draws).
pub fn beta_draw_matrix(out: &ChainOutput) -> DMatrix<f64> {
    DMatrix::from_fn(out.draws.len(), out.p, |r, c| out.draws[r].beta.get(c).copied().unwrap_or(0.0))
}
