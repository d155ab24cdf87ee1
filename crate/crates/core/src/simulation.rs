//! Synthetic data with AR(1)-correlated covariates and a ten-covariate truth,
//! plus selection metrics against that truth.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chain::ChainOutput;
use crate::data::{Dataset, Family};
use crate::error::ConfigError;
use crate::likelihood::logistic;
use crate::model::ModelIndicator;
use crate::special::trigamma;

/// Nonzero part of the coefficient pattern, before the `log p / sqrt n` scale.
pub const BETA_PATTERN: [f64; 10] = [2.0, -3.0, 2.0, 2.0, -3.0, 3.0, -2.0, 3.0, -2.0, 3.0];

/// Noise added to the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Dgp {
    /// Gaussian noise with variance `sigma2`.
    Ullgm { sigma2: f64 },
    /// No noise.
    Glm,
    /// Log of `Gamma(shape, rate = shape)` draws.
    LogGamma { shape: f64 },
}

impl Dgp {
    /// Variance of the noise term.
    pub fn noise_variance(&self) -> f64 {
        match *self {
            Dgp::Ullgm { sigma2 } => sigma2,
            Dgp::Glm => 0.0,
            Dgp::LogGamma { shape } => trigamma(shape),
        }
    }
}

impl fmt::Display for Dgp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dgp::Ullgm { sigma2 } => write!(f, "ullgm:{sigma2}"),
            Dgp::Glm => f.write_str("glm"),
            Dgp::LogGamma { shape } => write!(f, "loggamma:{shape}"),
        }
    }
}

impl FromStr for Dgp {
    type Err = String;

    /// `ullgm[:sigma2]` (0.2 by default), `glm`, `loggamma[:shape]` (5.5 by default).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s.as_str(), None),
        };
        let num = |d: f64| -> Result<f64, String> {
            arg.map_or(Ok(d), |a| a.parse().map_err(|_| format!("bad number '{a}' in dgp")))
        };
        match head {
            "ullgm" => Ok(Dgp::Ullgm { sigma2: num(0.2)? }),
            "glm" if arg.is_none() => Ok(Dgp::Glm),
            "loggamma" => Ok(Dgp::LogGamma { shape: num(5.5)? }),
            _ => Err(format!("unknown dgp '{s}' (ullgm[:sigma2], glm, loggamma[:shape])")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub family: Family,
    pub dgp: Dgp,
    pub intercept: f64,
    /// Binomial trials per observation (BiL only).
    pub trials: u64,
}

impl SimConfig {
    /// Intercept 1.5 and 30 trials.
    pub fn new(n: usize, p: usize, rho: f64, family: Family, dgp: Dgp) -> Self {
        SimConfig {
            n,
            p,
            rho,
            family,
            dgp,
            intercept: 1.5,
            trials: 30,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Simulation(m));
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if self.p < 10 {
            return bad(format!("the truth has ten active covariates, so p >= 10 (got {})", self.p));
        }
        if self.n < 2 {
            return bad(format!("need n >= 2, got {}", self.n));
        }
        if self.family == Family::Bil && self.trials == 0 {
            return bad("binomial trials must be positive".into());
        }
        match self.dgp {
            Dgp::Ullgm { sigma2 } if !(sigma2 >= 0.0 && sigma2.is_finite()) => {
                bad(format!("noise variance must be >= 0, got {sigma2}"))
            }
            Dgp::LogGamma { shape } if !(shape > 0.0 && shape.is_finite()) => {
                bad(format!("gamma shape must be positive, got {shape}"))
            }
            _ => Ok(()),
        }
    }
}

/// True coefficients and model of a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub beta_star: Vec<f64>,
    pub true_model: ModelIndicator,
    pub intercept: f64,
    pub noise_variance: f64,
}

/// `n x p` design with rows `N(0, Sigma)`, `Sigma_jk = rho^|j-k|`, via the AR(1) recursion.
pub fn gen_design<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> DMatrix<f64> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = prev;
        for j in 1..p {
            let e: f64 = rng.sample(StandardNormal);
            prev = rho * prev + innov * e;
            x[(i, j)] = prev;
        }
    }
    x
}

/// `(log p / sqrt n) (2, -3, 2, 2, -3, 3, -2, 3, -2, 3, 0, ..., 0)`.
///
/// # Panics
/// If `p < 10`.
pub fn gen_beta_star(n: usize, p: usize) -> SimTruth {
    assert!(p >= 10, "need p >= 10");
    let scale = (p as f64).ln() / (n as f64).sqrt();
    let mut beta_star = vec![0.0; p];
    for (b, c) in beta_star.iter_mut().zip(BETA_PATTERN) {
        *b = scale * c;
    }
    SimTruth {
        beta_star,
        true_model: ModelIndicator::from_indices(p, &(0..10).collect::<Vec<_>>()),
        intercept: 1.5,
        noise_variance: 0.0,
    }
}

/// Draws counts for the given design and truth.
pub fn gen_outcomes<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    truth: &SimTruth,
    config: &SimConfig,
    rng: &mut R,
) -> Dataset {
    let n = x.nrows();
    let mut y = Vec::with_capacity(n);
    let noise = match config.dgp {
        Dgp::Ullgm { sigma2 } => Some(Normal::new(0.0, sigma2.sqrt()).expect("valid sd")),
        _ => None,
    };
    let gamma = match config.dgp {
        Dgp::LogGamma { shape } => Some(Gamma::new(shape, 1.0 / shape).expect("valid gamma")),
        _ => None,
    };
    for i in 0..n {
        let mut z = truth.intercept;
        for (j, b) in truth.beta_star.iter().enumerate() {
            if *b != 0.0 {
                z += x[(i, j)] * b;
            }
        }
        if let Some(d) = &noise {
            z += d.sample(rng);
        }
        if let Some(d) = &gamma {
            z += d.sample(rng).ln();
        }
        let yi = match config.family {
            Family::Pln => Poisson::new(z.exp()).map_or(0.0, |d| d.sample(rng)) as u64,
            Family::Bil => Binomial::new(config.trials, logistic(z)).expect("valid binomial").sample(rng),
            Family::Nbl { r } => {
                // failures before the r-th success, as a gamma-Poisson mixture
                let pi = logistic(z);
                let lam: f64 = Gamma::new(r as f64, (1.0 - pi) / pi).expect("valid gamma").sample(rng);
                Poisson::new(lam).map_or(0.0, |d| d.sample(rng)) as u64
            }
        };
        y.push(yi);
    }
    let trials = (config.family == Family::Bil).then(|| vec![config.trials; n]);
    Dataset::new(y, trials, x.clone(), config.family).expect("simulated data are well formed")
}

/// Design, truth and outcomes in one call.
pub fn simulate<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<(Dataset, SimTruth), ConfigError> {
    config.validate()?;
    let x = gen_design(config.n, config.p, config.rho, rng);
    let mut truth = gen_beta_star(config.n, config.p);
    truth.intercept = config.intercept;
    truth.noise_variance = config.dgp.noise_variance();
    let data = gen_outcomes(&x, &truth, config, rng);
    Ok((data, truth))
}

/// Selection and calibration metrics of one fit against its truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub size: f64,
    pub frac_true: f64,
    pub brier: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub ln_g: f64,
    pub sigma2: f64,
    pub seconds: f64,
}

impl MetricsReport {
    pub const COLUMNS: [&'static str; 8] = ["size", "frac_true", "brier", "fnr", "fpr", "ln_g", "sigma2", "seconds"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.size,
            self.frac_true,
            self.brier,
            self.fnr,
            self.fpr,
            self.ln_g,
            self.sigma2,
            self.seconds,
        ]
    }

    /// Column-wise mean.
    pub fn mean(reports: &[MetricsReport]) -> MetricsReport {
        let k = reports.len() as f64;
        let mut v = [0.0; 8];
        for r in reports {
            for (a, b) in v.iter_mut().zip(r.values()) {
                *a += b / k;
            }
        }
        MetricsReport {
            size: v[0],
            frac_true: v[1],
            brier: v[2],
            fnr: v[3],
            fpr: v[4],
            ln_g: v[5],
            sigma2: v[6],
            seconds: v[7],
        }
    }
}

/// Metrics from inclusion probabilities.
///
/// The per-draw missed and false-inclusion fractions are linear in the
/// indicators, so their averages follow from the PIPs directly.
pub fn metrics_from_pip(pip: &[f64], truth: &ModelIndicator) -> (f64, f64, f64) {
    let p = pip.len();
    let k = truth.size();
    let (mut brier, mut fn_sum, mut fp_sum) = (0.0, 0.0, 0.0);
    for (j, &q) in pip.iter().enumerate() {
        let a = if truth.contains(j) { 1.0 } else { 0.0 };
        brier += (q - a) * (q - a);
        if truth.contains(j) {
            fn_sum += 1.0 - q;
        } else {
            fp_sum += q;
        }
    }
    let fnr = if k > 0 { fn_sum / k as f64 } else { 0.0 };
    let fpr = if p > k { fp_sum / (p - k) as f64 } else { 0.0 };
    (brier / p as f64, fnr, fpr)
}

pub fn metrics(output: &ChainOutput, truth: &SimTruth, seconds: f64) -> MetricsReport {
    let (brier, fnr, fpr) = metrics_from_pip(&output.pip, &truth.true_model);
    MetricsReport {
        size: output.mean_model_size(),
        frac_true: output.model_frequency(&truth.true_model),
        brier,
        fnr,
        fpr,
        ln_g: output.g.mean.ln(),
        sigma2: output.sigma2.mean,
        seconds,
    }
}
