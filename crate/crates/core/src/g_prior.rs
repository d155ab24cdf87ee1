//! Choice of g and the log-scale Metropolis-Hastings update under hyper-g/n.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::linear_gaussian::ModelSuffStats;

pub const G_TARGET_ACC: f64 = 0.234;

/// Prior on the g-prior scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GPrior {
    /// Unit-information prior, `g = n`.
    #[default]
    Uip,
    Fixed { g: f64 },
    /// Hyper-g/n with shape `a > 2`.
    HyperGOverN { a: f64 },
}

impl GPrior {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            GPrior::Fixed { g } if !(g > 0.0 && g.is_finite()) => {
                Err(ConfigError::Prior(format!("fixed g must be positive, got {g}")))
            }
            GPrior::HyperGOverN { a } if !(a > 2.0 && a.is_finite()) => {
                Err(ConfigError::Prior(format!("hyper-g/n needs a > 2, got {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, GPrior::HyperGOverN { .. })
    }

    /// Starting value: `n` for UIP, `g` for fixed, the prior median for hyper-g/n.
    pub fn initial_g(&self, n: usize) -> f64 {
        match *self {
            GPrior::Uip => n as f64,
            GPrior::Fixed { g } => g,
            GPrior::HyperGOverN { a } => hyper_g_over_n_quantile(0.5, a, n),
        }
    }
}

impl fmt::Display for GPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GPrior::Uip => f.write_str("uip"),
            GPrior::Fixed { g } => write!(f, "fixed:{g}"),
            GPrior::HyperGOverN { a } => write!(f, "hyper-gn:{a}"),
        }
    }
}

impl FromStr for GPrior {
    type Err = String;

    /// `uip`, `fixed:<g>` or `hyper-gn:<a>` (bare `hyper-gn` means `a = 3`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let parse = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number '{v}' in g-prior"));
        let prior = if s == "uip" {
            GPrior::Uip
        } else if s == "hyper-gn" {
            GPrior::HyperGOverN { a: 3.0 }
        } else if let Some(v) = s.strip_prefix("fixed:") {
            GPrior::Fixed { g: parse(v)? }
        } else if let Some(v) = s.strip_prefix("hyper-gn:") {
            GPrior::HyperGOverN { a: parse(v)? }
        } else {
            return Err(format!("unknown g-prior '{s}' (uip, fixed:<g>, hyper-gn:<a>)"));
        };
        prior.validate().map_err(|e| e.to_string())?;
        Ok(prior)
    }
}

/// `log p(g) = log((a-2)/(2n)) - (a/2) log(1 + g/n)`.
pub fn log_hyper_g_over_n(g: f64, a: f64, n: usize) -> f64 {
    let n = n as f64;
    ((a - 2.0) / (2.0 * n)).ln() - 0.5 * a * (g / n).ln_1p()
}

pub fn hyper_g_over_n_cdf(g: f64, a: f64, n: usize) -> f64 {
    1.0 - (-0.5 * (a - 2.0) * (g / n as f64).ln_1p()).exp()
}

pub fn hyper_g_over_n_quantile(q: f64, a: f64, n: usize) -> f64 {
    n as f64 * ((1.0 - q).powf(-2.0 / (a - 2.0)) - 1.0)
}

/// Adaptive proposal variance of the random walk on `log g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GAdaptState {
    pub log_tau: f64,
    pub iter: u64,
    pub target_acc: f64,
    pub kappa: f64,
    pub frozen: bool,
}

impl Default for GAdaptState {
    fn default() -> Self {
        GAdaptState {
            log_tau: 0.0,
            iter: 0,
            target_acc: G_TARGET_ACC,
            kappa: crate::latent::DEFAULT_KAPPA,
            frozen: false,
        }
    }
}

impl GAdaptState {
    pub fn tau(&self) -> f64 {
        self.log_tau.exp()
    }

    pub fn adapt(&mut self, accepted: bool) {
        if self.frozen {
            return;
        }
        self.iter += 1;
        let gain = (self.iter as f64).powf(-self.kappa);
        self.log_tau += gain * (f64::from(u8::from(accepted)) - self.target_acc);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GStep {
    pub g: f64,
    /// `log p(z | M, g)` at the returned `g`.
    pub log_lik: f64,
    pub accepted: bool,
}

/// Random-walk MH on `log g` for a generic g-likelihood, then adapts.
///
/// `current_log_lik` is `log_lik(g)`; the ratio includes the Jacobian `g*/g`.
pub fn mh_g_step<R, F>(
    g: f64,
    current_log_lik: f64,
    mut log_lik: F,
    a: f64,
    n: usize,
    adapt: &mut GAdaptState,
    rng: &mut R,
) -> GStep
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let eps: f64 = rng.sample(StandardNormal);
    let log_gs = g.ln() + adapt.tau().sqrt() * eps;
    let gs = log_gs.exp();
    let mut out = GStep {
        g,
        log_lik: current_log_lik,
        accepted: false,
    };
    if gs > 0.0 && gs.is_finite() {
        let ls = log_lik(gs);
        let log_ratio = log_hyper_g_over_n(gs, a, n) - log_hyper_g_over_n(g, a, n) + ls - current_log_lik
            + (log_gs - g.ln());
        let u: f64 = rng.random();
        if log_ratio >= 0.0 || u.ln() < log_ratio {
            out = GStep {
                g: gs,
                log_lik: ls,
                accepted: true,
            };
        }
    }
    adapt.adapt(out.accepted);
    out
}

/// g update targeting `p(g) p(z | M, g)` with the closed-form marginal.
pub fn mh_update_g<R: Rng + ?Sized>(
    g: f64,
    stats: &ModelSuffStats,
    a: f64,
    adapt: &mut GAdaptState,
    rng: &mut R,
) -> GStep {
    mh_g_step(g, stats.log_marginal(g), |v| stats.log_marginal(v), a, stats.n(), adapt, rng)
}
