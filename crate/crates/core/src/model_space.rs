//! Beta-binomial model prior, the add-delete-swap proposal and the model
//! Metropolis-Hastings step.

use rand::Rng;

use crate::error::ConfigError;
use crate::model::ModelIndicator;
use crate::special::ln_gamma;

/// Beta-binomial prior over model size with `a = 1`, `b = (p - m) / m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPrior {
    pub a: f64,
    pub b: f64,
    pub p: usize,
    log_norm: f64,
}

impl ModelPrior {
    /// Prior with expected model size `m`, which must lie strictly inside `(0, p)`.
    pub fn new(p: usize, m: f64) -> Result<Self, ConfigError> {
        if !(m > 0.0 && m < p as f64) {
            return Err(ConfigError::Prior(format!(
                "expected model size must lie in (0, {p}), got {m}"
            )));
        }
        Self::with_ab(p, 1.0, (p as f64 - m) / m)
    }

    pub fn with_ab(p: usize, a: f64, b: f64) -> Result<Self, ConfigError> {
        if !(a > 0.0 && b > 0.0) || p == 0 {
            return Err(ConfigError::Prior(format!(
                "beta-binomial parameters must be positive (a = {a}, b = {b}, p = {p})"
            )));
        }
        let log_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) - ln_gamma(a + b + p as f64);
        Ok(ModelPrior { a, b, p, log_norm })
    }

    /// Prior expected model size `p a / (a + b)`.
    pub fn expected_size(&self) -> f64 {
        self.p as f64 * self.a / (self.a + self.b)
    }

    /// Log prior mass of one particular model of size `p_k`.
    pub fn log_prior_size(&self, p_k: usize) -> f64 {
        self.log_norm + ln_gamma(self.a + p_k as f64) + ln_gamma(self.b + (self.p - p_k) as f64)
    }

    /// Log prior mass of `model`; `-inf` when it is rank deficient.
    pub fn log_prior(&self, model: &ModelIndicator, full_rank: bool) -> f64 {
        if full_rank {
            self.log_prior_size(model.size())
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Prior pmf of the model size (sums the per-model mass over `C(p, k)` models).
    pub fn size_pmf(&self) -> Vec<f64> {
        (0..=self.p)
            .map(|k| {
                let ln_c = ln_gamma(self.p as f64 + 1.0) - ln_gamma(k as f64 + 1.0)
                    - ln_gamma((self.p - k) as f64 + 1.0);
                (ln_c + self.log_prior_size(k)).exp()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Add,
    Delete,
    Swap,
}

#[derive(Debug, Clone)]
pub struct AdsProposal {
    pub proposed: ModelIndicator,
    pub mv: Move,
    /// `log q(M | M*) - log q(M* | M)`.
    pub log_correction: f64,
}

fn pi_add(k: usize, p: usize) -> f64 {
    if k == 0 {
        1.0
    } else if k < p {
        1.0 / 3.0
    } else {
        0.0
    }
}

fn pi_delete(k: usize, p: usize) -> f64 {
    if k == p {
        1.0
    } else if k > 0 {
        1.0 / 3.0
    } else {
        0.0
    }
}

/// Log proposal correction of an add or delete move out of a model of size `k`.
pub fn ads_log_correction(mv: Move, k: usize, p: usize) -> f64 {
    let (kf, pf) = (k as f64, p as f64);
    match mv {
        Move::Add => (pi_delete(k + 1, p) / (kf + 1.0)).ln() - (pi_add(k, p) / (pf - kf)).ln(),
        Move::Delete => (pi_add(k - 1, p) / (pf - kf + 1.0)).ln() - (pi_delete(k, p) / kf).ln(),
        Move::Swap => 0.0,
    }
}

/// Draws an add, delete or swap neighbour of `model`.
///
/// Add is forced from the empty model and delete from the full model; otherwise
/// each move has probability 1/3 and covariates are picked uniformly.
pub fn propose_ads<R: Rng + ?Sized>(model: &ModelIndicator, rng: &mut R) -> AdsProposal {
    let p = model.p();
    let k = model.size();
    let mv = if k == 0 {
        Move::Add
    } else if k == p {
        Move::Delete
    } else {
        match rng.random_range(0..3u8) {
            0 => Move::Add,
            1 => Move::Delete,
            _ => Move::Swap,
        }
    };
    let mut proposed = model.clone();
    match mv {
        Move::Add => {
            let j = model.excluded()[rng.random_range(0..p - k)];
            proposed.add(j);
        }
        Move::Delete => {
            let j = model.included()[rng.random_range(0..k)];
            proposed.remove(j);
        }
        Move::Swap => {
            let out = model.included()[rng.random_range(0..k)];
            let inn = model.excluded()[rng.random_range(0..p - k)];
            proposed.remove(out);
            proposed.add(inn);
        }
    }
    AdsProposal {
        proposed,
        mv,
        log_correction: ads_log_correction(mv, k, p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStep {
    pub accepted: bool,
    pub mv: Move,
    /// Log marginal likelihood of the model held after the step.
    pub log_marginal: f64,
}

/// One Metropolis-Hastings move in model space.
///
/// `log_marginal` evaluates a proposed model and returns `None` when it is
/// rank deficient (zero prior mass, rejected outright). `current_log_marginal`
/// is the value for the current model, which is assumed full rank.
pub fn model_mh_step<R, F>(
    model: &mut ModelIndicator,
    current_log_marginal: f64,
    prior: &ModelPrior,
    mut log_marginal: F,
    rng: &mut R,
) -> ModelStep
where
    R: Rng + ?Sized,
    F: FnMut(&ModelIndicator) -> Option<f64>,
{
    let prop = propose_ads(model, rng);
    let rejected = ModelStep {
        accepted: false,
        mv: prop.mv,
        log_marginal: current_log_marginal,
    };
    let Some(lm) = log_marginal(&prop.proposed) else {
        return rejected;
    };
    let log_ratio = prior.log_prior_size(prop.proposed.size()) - prior.log_prior_size(model.size())
        + (lm - current_log_marginal)
        + prop.log_correction;
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        *model = prop.proposed;
        ModelStep {
            accepted: true,
            mv: prop.mv,
            log_marginal: lm,
        }
    } else {
        rejected
    }
}

/// Exact posterior over all `2^p` models given a log-marginal function.
///
/// Returns `(model, probability)` pairs in bit-pattern order; intended for small `p`.
///
/// # Panics
/// If `p > 24`.
pub fn enumerate_posterior<F>(p: usize, prior: &ModelPrior, mut log_marginal: F) -> Vec<(ModelIndicator, f64)>
where
    F: FnMut(&ModelIndicator) -> Option<f64>,
{
    assert!(p <= 24, "exhaustive enumeration is limited to p <= 24");
    let mut out: Vec<(ModelIndicator, f64)> = (0u64..1 << p)
        .map(|mask| {
            let idx: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
            let m = ModelIndicator::from_indices(p, &idx);
            let lp = match log_marginal(&m) {
                Some(lm) => lm + prior.log_prior_size(m.size()),
                None => f64::NEG_INFINITY,
            };
            (m, lp)
        })
        .collect();
    let max = out.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = out.iter().map(|(_, l)| (l - max).exp()).sum();
    for (_, l) in out.iter_mut() {
        *l = (*l - max).exp() / total;
    }
    out
}
