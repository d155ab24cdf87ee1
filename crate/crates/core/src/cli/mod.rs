//! Command-line interface: `fit`, `simulate`, `predict` and `cv`.
//!
//! Exit codes: 0 success, 1 sampler failure, 2 invalid configuration or
//! data that fail the posterior propriety checks, 3 I/O or parse errors.

mod io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::chain::{run_chains, ChainConfig, ChainOutput, Draw, PriorConfig};
use crate::data::{validate_dataset, Dataset, Family, Standardize};
use crate::error::{ChainError, DataError};
use crate::g_prior::GPrior;
use crate::likelihood::PointLik;
use crate::model::ModelIndicator;
use crate::predictive::{lps, LpsReport};
use crate::rng::aux_rng;
use crate::simulation::{metrics, simulate, Dgp, MetricsReport, SimConfig};
use io::{num, row, write_csv, Table};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Sampler(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sampler(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) | CliError::Sampler(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Structural(_) => CliError::Io(e.to_string()),
            DataError::PosteriorImproprietyRisk(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Data(d) => d.into(),
            ChainError::Config(c) => CliError::Validation(c.to_string()),
            other => CliError::Sampler(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ullgm", version, about = "Bayesian variable selection for overdispersed counts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the sampler on a CSV dataset.
    Fit(FitArgs),
    /// Generate synthetic data, optionally fitting replicates and scoring selection.
    Simulate(SimArgs),
    /// Score new observations with the draws saved by `fit --save-draws`.
    Predict(PredictArgs),
    /// Repeated random train/test splits scored by log predictive score.
    Cv(CvArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Outcome column (counts).
    #[arg(long)]
    pub outcome: Option<String>,
    /// Trial-count column (bil only).
    #[arg(long)]
    pub trials: Option<String>,
    /// Comma-separated covariate columns; default is every other column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// pln, bil or nbl.
    #[arg(long)]
    pub family: Option<String>,
    /// Fixed shape for nbl.
    #[arg(long)]
    pub r: Option<u32>,
    /// uip, fixed:<g> or hyper-gn:<a>.
    #[arg(long)]
    pub gprior: Option<String>,
    /// Prior expected model size (default p/2).
    #[arg(long)]
    pub msize: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// center or zscore.
    #[arg(long)]
    pub standardize: Option<String>,
    /// Independent chains (seeds seed, seed+1, ...), merged.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Hold sigma^2 fixed at this value instead of sampling it.
    #[arg(long)]
    pub sigma2_pinned: Option<f64>,
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "ullgm-out")]
    pub out_dir: PathBuf,
    /// Also write every kept draw to draws.csv.
    #[arg(long)]
    pub save_draws: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub splits: Option<usize>,
    /// Fraction of rows held out per split.
    #[arg(long)]
    pub test_share: Option<f64>,
    #[arg(long, default_value = "ullgm-cv")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct PredictArgs {
    /// Output directory of a `fit --save-draws` run.
    #[arg(long)]
    pub fit_dir: PathBuf,
    /// CSV with the fitted covariate columns and an outcome column.
    #[arg(long)]
    pub input: PathBuf,
    /// Outcome column (defaults to the one used by the fit).
    #[arg(long)]
    pub outcome: Option<String>,
    /// Trial-count column (defaults to the one used by the fit).
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long, default_value = "ullgm-predict")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    #[arg(long, default_value_t = 0.6)]
    pub rho: f64,
    /// ullgm[:sigma2], glm or loggamma[:shape].
    #[arg(long, default_value = "ullgm")]
    pub dgp: String,
    /// Binomial trials per observation.
    #[arg(long, default_value_t = 30)]
    pub n_trials: u64,
    #[arg(long, default_value_t = 1.5)]
    pub intercept: f64,
    /// Fit each replicate and write metrics.csv instead of the data.
    #[arg(long)]
    pub run: bool,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value = "ullgm-sim")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Settings read from `--config`; keys mirror the flag names.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    family: Option<String>,
    r: Option<u32>,
    gprior: Option<String>,
    msize: Option<f64>,
    iters: Option<usize>,
    burnin: Option<usize>,
    thin: Option<usize>,
    seed: Option<u64>,
    standardize: Option<String>,
    chains: Option<usize>,
    sigma2_pinned: Option<f64>,
    splits: Option<usize>,
    test_share: Option<f64>,
    outcome: Option<String>,
    trials: Option<String>,
    covariates: Option<Vec<String>>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))
}

/// Resolved run settings: flags over config file over defaults.
#[derive(Debug, Clone)]
struct Settings {
    family: Family,
    prior: PriorConfig,
    chain: ChainConfig,
    chains: usize,
    file: FileConfig,
}

fn threads_from_env() -> usize {
    std::env::var("ULLGM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

fn resolve(m: &ModelArgs) -> Result<Settings, CliError> {
    let file = load_file_config(m.config.as_deref())?;
    let v = |e: String| CliError::Validation(e);

    let fam_s = m.family.clone().or(file.family.clone()).unwrap_or_else(|| "pln".into());
    let mut family: Family = fam_s.parse().map_err(v)?;
    if let Some(r) = m.r.or(file.r) {
        match family {
            Family::Nbl { .. } if r >= 1 => family = Family::Nbl { r },
            Family::Nbl { .. } => return Err(v("--r must be at least 1".into())),
            _ => return Err(v(format!("--r only applies to the nbl family, not {family}"))),
        }
    }
    let gprior: GPrior = m
        .gprior
        .clone()
        .or(file.gprior.clone())
        .map_or(Ok(GPrior::Uip), |s| s.parse())
        .map_err(v)?;
    let standardize: Standardize = m
        .standardize
        .clone()
        .or(file.standardize.clone())
        .map_or(Ok(Standardize::Center), |s| s.parse())
        .map_err(v)?;
    let iters = m.iters.or(file.iters);
    let burnin = m.burnin.or(file.burnin);
    let (n_iter, burn_in) = match (iters, burnin) {
        (None, None) => (550_000, 250_000),
        (Some(i), None) => (i, i / 2),
        (None, Some(b)) => (b + 300_000, b),
        (Some(i), Some(b)) => (i, b),
    };
    let chains = m.chains.or(file.chains).unwrap_or(1);
    if chains == 0 {
        return Err(v("--chains must be at least 1".into()));
    }
    let chain = ChainConfig {
        n_iter,
        burn_in,
        thin: m.thin.or(file.thin).unwrap_or(1),
        seed: m.seed.or(file.seed).unwrap_or(1),
        store_z: false,
        store_beta: false,
        threads: threads_from_env(),
        standardize,
        sigma2_pinned: m.sigma2_pinned.or(file.sigma2_pinned),
    };
    chain.validate().map_err(|e| v(e.to_string()))?;
    Ok(Settings {
        family,
        prior: PriorConfig::new(gprior, m.msize.or(file.msize)),
        chain,
        chains,
        file,
    })
}

#[derive(Debug, Clone, Serialize)]
struct DatasetFingerprint {
    path: String,
    rows: usize,
    cols: usize,
    sha256: String,
    outcome: String,
    trials: Option<String>,
    covariates: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    family: Family,
    gprior: String,
    expected_model_size: Option<f64>,
    chain: ChainConfig,
    chains: usize,
    standardize: Standardize,
    dataset: Option<DatasetFingerprint>,
    extra: serde_json::Value,
    outputs: Vec<String>,
    wall_clock_seconds: f64,
}

impl Manifest {
    fn new(command: &'static str, s: &Settings) -> Self {
        Manifest {
            tool: "ullgm",
            version: env!("CARGO_PKG_VERSION"),
            command,
            family: s.family,
            gprior: s.prior.gprior.to_string(),
            expected_model_size: s.prior.m,
            chain: s.chain.clone(),
            chains: s.chains,
            standardize: s.chain.standardize,
            dataset: None,
            extra: serde_json::Value::Null,
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    fn write(mut self, dir: &Path, start: Instant) -> Result<(), CliError> {
        self.wall_clock_seconds = start.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        io::write_text(&dir.join("manifest.json"), &(text + "\n"))
    }
}

/// A dataset loaded from CSV together with its provenance.
struct Loaded {
    data: Dataset,
    fingerprint: DatasetFingerprint,
}

fn load_dataset(d: &DataArgs, s: &Settings) -> Result<Loaded, CliError> {
    let table = Table::read(&d.input)?;
    let outcome = d
        .outcome
        .clone()
        .or(s.file.outcome.clone())
        .ok_or_else(|| CliError::Validation("--outcome is required".into()))?;
    let trials = d.trials.clone().or(s.file.trials.clone());
    let y_col = table.require(&outcome, "outcome")?;
    let t_col = match &trials {
        Some(t) => Some(table.require(t, "trials")?),
        None => None,
    };
    if s.family.needs_trials() && t_col.is_none() {
        return Err(CliError::Io("bil family needs a trial-count column (--trials)".into()));
    }
    let covariates: Vec<String> = match d.covariates.clone().or(s.file.covariates.clone()) {
        Some(c) => c,
        None => table
            .headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != y_col && Some(*i) != t_col)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let x_cols = covariates
        .iter()
        .map(|c| table.require(c, "covariate"))
        .collect::<Result<Vec<_>, _>>()?;
    let y = table.counts(y_col)?;
    let t = t_col.map(|c| table.counts(c)).transpose()?;
    let x = table.reals(&x_cols)?;
    let data = Dataset::new(y, t, x, s.family)?.with_names(covariates.clone())?;
    Ok(Loaded {
        fingerprint: DatasetFingerprint {
            path: d.input.display().to_string(),
            rows: data.n(),
            cols: table.headers.len(),
            sha256: table.sha256,
            outcome,
            trials,
            covariates,
        },
        data,
    })
}

fn run_fit_chains(data: &Dataset, s: &Settings, store_beta: bool) -> Result<ChainOutput, CliError> {
    validate_dataset(data)?;
    let cfg = ChainConfig {
        store_beta,
        ..s.chain.clone()
    };
    Ok(run_chains(data, &s.prior, &cfg, s.chains)?)
}

fn write_fit_outputs(dir: &Path, names: &[String], out: &ChainOutput, save_draws: bool) -> Result<Vec<String>, CliError> {
    let mut files = Vec::new();
    let mut rows = vec![row(["name", "pip", "beta_mean", "beta_sd"])];
    for j in 0..out.p {
        rows.push(vec![names[j].clone(), num(out.pip[j]), num(out.beta_mean[j]), num(out.beta_sd[j])]);
    }
    write_csv(&dir.join("summary.csv"), &rows)?;
    files.push("summary.csv".to_string());

    let mut rows = vec![row(["parameter", "mean", "sd", "q025", "q25", "q50", "q75", "q975"])];
    for (name, s) in [("alpha", out.alpha), ("sigma2", out.sigma2), ("g", out.g)] {
        rows.push(vec![
            name.to_string(),
            num(s.mean),
            num(s.sd),
            num(s.q025),
            num(s.q25),
            num(s.q50),
            num(s.q75),
            num(s.q975),
        ]);
    }
    write_csv(&dir.join("scalars.csv"), &rows)?;
    files.push("scalars.csv".to_string());

    let mut rows = vec![row(["rank", "model", "size", "frequency", "covariates"])];
    for (k, (m, f)) in out.top_models(100).enumerate() {
        let cov: Vec<&str> = m.included_sorted().iter().map(|&j| names[j].as_str()).collect();
        rows.push(vec![
            (k + 1).to_string(),
            m.bit_string(),
            m.size().to_string(),
            num(f),
            cov.join(";"),
        ]);
    }
    write_csv(&dir.join("top_models.csv"), &rows)?;
    files.push("top_models.csv".to_string());

    let mut rows = vec![row(["size", "probability"])];
    for (k, pr) in out.size_pmf().into_iter().enumerate() {
        rows.push(vec![k.to_string(), num(pr)]);
    }
    write_csv(&dir.join("model_size.csv"), &rows)?;
    files.push("model_size.csv".to_string());

    let mut rows = vec![row(["name", "mean", "scale"])];
    for j in 0..out.p {
        rows.push(vec![names[j].clone(), num(out.col_means[j]), num(out.col_scales[j])]);
    }
    write_csv(&dir.join("design.csv"), &rows)?;
    files.push("design.csv".to_string());

    if save_draws {
        let mut header = row(["iteration", "alpha", "sigma2", "g", "size"]);
        header.extend(names.iter().cloned());
        let mut rows = vec![header];
        for d in &out.draws {
            let mut r = vec![
                d.iteration.to_string(),
                num(d.alpha),
                num(d.sigma2),
                num(d.g),
                d.model.size().to_string(),
            ];
            r.extend(d.beta.iter().map(|&b| num(b)));
            rows.push(r);
        }
        write_csv(&dir.join("draws.csv"), &rows)?;
        files.push("draws.csv".to_string());
    }
    Ok(files)
}

fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let s = resolve(&a.model)?;
    let loaded = load_dataset(&a.data, &s)?;
    let out = run_fit_chains(&loaded.data, &s, a.save_draws)?;
    let dir = io::out_dir(&a.out_dir)?;
    let files = write_fit_outputs(&dir, loaded.data.names(), &out, a.save_draws)?;
    let mut man = Manifest::new("fit", &s);
    man.chain.store_beta = a.save_draws;
    man.dataset = Some(loaded.fingerprint);
    man.extra = serde_json::json!({
        "kept_draws": out.n_kept,
        "acceptance": out.acceptance,
    });
    man.outputs = files;
    man.write(&dir, start)
}

fn holdout_points(data: &Dataset, idx: &[usize], transform: impl Fn(&[f64]) -> Vec<f64>) -> Vec<(PointLik, Vec<f64>)> {
    idx.iter()
        .map(|&i| {
            let raw: Vec<f64> = data.x().row(i).iter().copied().collect();
            (
                PointLik::new(data.family(), data.y()[i], data.trials_at(i)),
                transform(&raw),
            )
        })
        .collect()
}

fn score(points: &[(PointLik, Vec<f64>)], draws: &[Draw]) -> LpsReport {
    let threads = threads_from_env();
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| lps(points, draws)),
        Err(_) => lps(points, draws),
    }
}

fn cmd_cv(a: &CvArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let s = resolve(&a.model)?;
    let loaded = load_dataset(&a.data, &s)?;
    let data = &loaded.data;
    validate_dataset(data)?;
    let splits = a.splits.or(s.file.splits).unwrap_or(10);
    let share = a.test_share.or(s.file.test_share).unwrap_or(0.15);
    if splits == 0 {
        return Err(CliError::Validation("--splits must be at least 1".into()));
    }
    if !(share > 0.0 && share < 1.0) {
        return Err(CliError::Validation(format!("--test-share must lie in (0, 1), got {share}")));
    }
    let n = data.n();
    let n_test = ((share * n as f64).round() as usize).clamp(1, n.saturating_sub(2).max(1));
    let mut split_rng = aux_rng(s.chain.seed);
    let mut rows = vec![row(["split", "n_train", "n_test", "lps", "n_floored"])];
    let mut scores = Vec::with_capacity(splits);
    for k in 0..splits {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut split_rng);
        let (test, train) = idx.split_at(n_test);
        let mut train = train.to_vec();
        train.sort_unstable();
        let mut test = test.to_vec();
        test.sort_unstable();
        let train_data = data.subset(&train)?;
        validate_dataset(&train_data).map_err(|e| CliError::Validation(format!("split {}: {e}", k + 1)))?;
        let split_settings = Settings {
            chain: ChainConfig {
                seed: s.chain.seed.wrapping_add(k as u64),
                ..s.chain.clone()
            },
            ..s.clone()
        };
        let out = run_fit_chains(&train_data, &split_settings, true)?;
        let points = holdout_points(data, &test, |r| out.transform_row(r));
        let rep = score(&points, &out.draws);
        let floored = rep.points.iter().filter(|p| p.floored).count();
        rows.push(vec![
            (k + 1).to_string(),
            train.len().to_string(),
            test.len().to_string(),
            num(rep.lps),
            floored.to_string(),
        ]);
        scores.push(rep.lps);
    }
    let dir = io::out_dir(&a.out_dir)?;
    write_csv(&dir.join("cv_splits.csv"), &rows)?;
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let median = crate::chain::quantile_sorted(&sorted, 0.5);
    write_csv(
        &dir.join("cv_summary.csv"),
        &[
            row(["splits", "test_share", "mean", "median", "min", "max"]),
            vec![
                splits.to_string(),
                num(share),
                num(mean),
                num(median),
                num(sorted[0]),
                num(sorted[sorted.len() - 1]),
            ],
        ],
    )?;
    let mut man = Manifest::new("cv", &s);
    man.dataset = Some(loaded.fingerprint);
    man.extra = serde_json::json!({ "splits": splits, "test_share": share, "n_test": n_test });
    man.outputs = vec!["cv_splits.csv".into(), "cv_summary.csv".into()];
    man.write(&dir, start)
}

#[derive(Deserialize)]
struct FitManifest {
    family: Family,
    dataset: Option<FitDataset>,
}

#[derive(Deserialize)]
struct FitDataset {
    outcome: String,
    trials: Option<String>,
}

fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let text = std::fs::read_to_string(a.fit_dir.join("manifest.json"))
        .map_err(|e| CliError::Io(format!("cannot read fit manifest: {e}")))?;
    let fit: FitManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("bad fit manifest: {e}")))?;
    let design = Table::read(&a.fit_dir.join("design.csv"))?;
    let names: Vec<String> = design.rows.iter().map(|r| r[0].clone()).collect();
    let scale = design.reals(&[1, 2])?;
    let draws_t = Table::read(&a.fit_dir.join("draws.csv"))
        .map_err(|e| CliError::Io(format!("{} (was the fit run with --save-draws?)", e.message())))?;
    let p = names.len();
    if draws_t.headers.len() != 5 + p {
        return Err(CliError::Io("draws.csv does not match design.csv".into()));
    }
    let vals = draws_t.reals(&(1..5 + p).collect::<Vec<_>>())?;
    let draws: Vec<Draw> = (0..vals.nrows())
        .map(|r| {
            let beta: Vec<f64> = (0..p).map(|j| vals[(r, 4 + j)]).collect();
            let inc: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            Draw {
                iteration: r + 1,
                alpha: vals[(r, 0)],
                sigma2: vals[(r, 1)],
                g: vals[(r, 2)],
                model: ModelIndicator::from_indices(p, &inc),
                beta,
            }
        })
        .collect();
    if draws.is_empty() {
        return Err(CliError::Io("draws.csv has no draws".into()));
    }

    let input = Table::read(&a.input)?;
    let fd = fit.dataset.as_ref();
    let outcome = a
        .outcome
        .clone()
        .or(fd.map(|d| d.outcome.clone()))
        .ok_or_else(|| CliError::Validation("--outcome is required".into()))?;
    let trials = a.trials.clone().or(fd.and_then(|d| d.trials.clone()));
    let mut cols = Vec::with_capacity(p);
    for nm in &names {
        cols.push(
            input
                .column(nm)
                .ok_or_else(|| CliError::Validation(format!("holdout data lack fitted covariate '{nm}'")))?,
        );
    }
    let y = input.counts(input.require(&outcome, "outcome")?)?;
    let t = match (&trials, fit.family.needs_trials()) {
        (Some(tc), true) => Some(input.counts(input.require(tc, "trials")?)?),
        (None, true) => return Err(CliError::Io("bil family needs a trial-count column (--trials)".into())),
        _ => None,
    };
    let x = input.reals(&cols)?;
    let points: Vec<(PointLik, Vec<f64>)> = (0..x.nrows())
        .map(|i| {
            let xr: Vec<f64> = (0..p).map(|j| (x[(i, j)] - scale[(j, 0)]) / scale[(j, 1)]).collect();
            let ti = t.as_ref().map_or(0, |t| t[i]);
            (PointLik::new(fit.family, y[i], ti), xr)
        })
        .collect();
    let rep = score(&points, &draws);

    let dir = io::out_dir(&a.out_dir)?;
    let mut rows = vec![row(["row", "y", "log_prob", "prob", "floored"])];
    for (i, (pt, (pl, _))) in rep.points.iter().zip(&points).enumerate() {
        rows.push(vec![
            (i + 1).to_string(),
            pl.y.to_string(),
            num(pt.log_prob),
            num(pt.log_prob.exp()),
            u8::from(pt.floored).to_string(),
        ]);
    }
    write_csv(&dir.join("predictions.csv"), &rows)?;
    let floored = rep.points.iter().filter(|p| p.floored).count();
    write_csv(
        &dir.join("lps.csv"),
        &[
            row(["n_points", "n_draws", "lps", "n_floored"]),
            vec![rep.points.len().to_string(), draws.len().to_string(), num(rep.lps), floored.to_string()],
        ],
    )?;
    let man = serde_json::json!({
        "tool": "ullgm",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "predict",
        "family": fit.family,
        "fit_dir": a.fit_dir.display().to_string(),
        "input": a.input.display().to_string(),
        "input_sha256": input.sha256,
        "draws": draws.len(),
        "outputs": ["predictions.csv", "lps.csv"],
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
    });
    io::write_text(
        &dir.join("manifest.json"),
        &(serde_json::to_string_pretty(&man).expect("manifest serializes") + "\n"),
    )
}

fn cmd_simulate(a: &SimArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let s = resolve(&a.model)?;
    let v = |e: String| CliError::Validation(e);
    let dgp: Dgp = a.dgp.parse().map_err(v)?;
    let mut cfg = SimConfig::new(a.n, a.p, a.rho, s.family, dgp);
    cfg.intercept = a.intercept;
    cfg.trials = a.n_trials;
    cfg.validate().map_err(|e| v(e.to_string()))?;
    if a.replicates == 0 {
        return Err(v("--replicates must be at least 1".into()));
    }
    let dir = io::out_dir(&a.out_dir)?;
    let mut man = Manifest::new("simulate", &s);
    man.extra = serde_json::json!({ "simulation": cfg, "replicates": a.replicates, "run": a.run });

    if !a.run {
        let (data, truth) = simulate(&cfg, &mut aux_rng(s.chain.seed)).map_err(|e| v(e.to_string()))?;
        let mut header = row(["y"]);
        if data.trials().is_some() {
            header.push("trials".into());
        }
        header.extend(data.names().iter().cloned());
        let mut rows = vec![header];
        for i in 0..data.n() {
            let mut r = vec![data.y()[i].to_string()];
            if let Some(t) = data.trials() {
                r.push(t[i].to_string());
            }
            r.extend(data.x().row(i).iter().map(|&x| num(x)));
            rows.push(r);
        }
        write_csv(&dir.join("dataset.csv"), &rows)?;
        let mut rows = vec![
            row(["parameter", "value", "included"]),
            row(["intercept".to_string(), num(truth.intercept), "1".to_string()]),
            row(["sigma2".to_string(), num(truth.noise_variance), String::new()]),
        ];
        for (j, b) in truth.beta_star.iter().enumerate() {
            rows.push(vec![
                data.names()[j].clone(),
                num(*b),
                u8::from(truth.true_model.contains(j)).to_string(),
            ]);
        }
        write_csv(&dir.join("truth.csv"), &rows)?;
        man.outputs = vec!["dataset.csv".into(), "truth.csv".into()];
        return man.write(&dir, start);
    }

    let mut header = row(["replicate"]);
    header.extend(MetricsReport::COLUMNS.iter().map(|c| c.to_string()));
    let mut rows = vec![header];
    let mut reports = Vec::with_capacity(a.replicates);
    for r in 0..a.replicates {
        let seed = s.chain.seed.wrapping_add(r as u64);
        let (data, truth) = simulate(&cfg, &mut aux_rng(seed)).map_err(|e| v(e.to_string()))?;
        let rep_settings = Settings {
            chain: ChainConfig { seed, ..s.chain.clone() },
            ..s.clone()
        };
        let t = Instant::now();
        let out = run_fit_chains(&data, &rep_settings, false)?;
        let m = metrics(&out, &truth, t.elapsed().as_secs_f64());
        let mut line = vec![(r + 1).to_string()];
        line.extend(m.values().iter().map(|&x| num(x)));
        rows.push(line);
        reports.push(m);
    }
    let mean = MetricsReport::mean(&reports);
    let mut line = vec!["mean".to_string()];
    line.extend(mean.values().iter().map(|&x| num(x)));
    rows.push(line);
    write_csv(&dir.join("metrics.csv"), &rows)?;
    man.outputs = vec!["metrics.csv".into()];
    man.write(&dir, start)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a),
    }
}

/// Parses `std::env::args`, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
