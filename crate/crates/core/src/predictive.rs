//! Predictive pmf by Gauss-Legendre quadrature over the latent value, and the
//! log predictive score.

use rayon::prelude::*;

use crate::chain::Draw;
use crate::data::Family;
use crate::likelihood::{linear_predictor, PointLik};
use crate::special::{gauss_legendre_64, log_sum_exp};

/// Smallest probability reported; keeps logs finite.
pub const PMF_FLOOR: f64 = 1e-300;

/// Gaussian approximation to the posterior of one latent value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZApproxMoments {
    pub m: f64,
    /// Variance.
    pub s: f64,
}

/// Approximate posterior mean and variance of `z` given `y` and the prior
/// `N(linpred, sigma2)`.
///
/// Zero PLN counts use `y + 0.5`; BiL proportions are clamped to
/// `[0.5 / (N + 1), 1 - 0.5 / (N + 1)]`. NBL goes through the BiL form with
/// `N' = y + r` and `p = r / (y + r)`.
pub fn approx_z_moments(pl: &PointLik, linpred: f64, sigma2: f64) -> ZApproxMoments {
    let prec = 1.0 / sigma2;
    let y = pl.y as f64;
    match pl.family {
        Family::Pln => {
            let yp = if pl.y == 0 { y + 0.5 } else { y };
            let s = 1.0 / (yp + prec);
            ZApproxMoments {
                m: s * (yp.ln() * yp + linpred * prec),
                s,
            }
        }
        Family::Bil => logit_moments(y, pl.trials as f64, linpred, prec),
        Family::Nbl { r } => logit_moments(r as f64, y + r as f64, linpred, prec),
    }
}

fn logit_moments(succ: f64, trials: f64, linpred: f64, prec: f64) -> ZApproxMoments {
    let lo = 0.5 / (trials + 1.0);
    let p = (succ / trials).clamp(lo, 1.0 - lo);
    let info = trials * p * (1.0 - p);
    let s = 1.0 / (info + prec);
    ZApproxMoments {
        m: s * ((p / (1.0 - p)).ln() * info + linpred * prec),
        s,
    }
}

fn log_normal_density(z: f64, mean: f64, sigma2: f64) -> f64 {
    let r = z - mean;
    -0.5 * (r * r / sigma2 + (2.0 * std::f64::consts::PI * sigma2).ln())
}

/// `log` of `int P(y | h(z)) N(z | linpred, sigma2) dz`, without flooring.
///
/// The core panel is `m +- 6 sqrt(s)` from [`approx_z_moments`]; two flank
/// panels cover whatever of `linpred +- 8 sigma` lies outside it.
pub fn log_predictive_pmf_raw(pl: &PointLik, linpred: f64, sigma2: f64) -> f64 {
    if !pl.in_support() {
        return f64::NEG_INFINITY;
    }
    let mo = approx_z_moments(pl, linpred, sigma2);
    let (lo, hi) = (mo.m - 6.0 * mo.s.sqrt(), mo.m + 6.0 * mo.s.sqrt());
    let sd = sigma2.sqrt();
    let (plo, phi) = (linpred - 8.0 * sd, linpred + 8.0 * sd);
    let mut panels = vec![(lo, hi)];
    if plo < lo {
        panels.push((plo, lo.min(phi)));
    }
    if phi > hi {
        panels.push((hi.max(plo), phi));
    }
    let (nodes, weights) = gauss_legendre_64();
    let lc = pl.log_const();
    let mut terms = Vec::with_capacity(64 * panels.len());
    for (a, b) in panels {
        if !(b > a) {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in nodes.iter().zip(weights) {
            let z = mid + half * x;
            terms.push((w * half).ln() + lc + pl.log_kernel(z) + log_normal_density(z, linpred, sigma2));
        }
    }
    log_sum_exp(&terms)
}

/// Predictive log probability, floored at `ln 1e-300`.
pub fn log_predictive_pmf(pl: &PointLik, linpred: f64, sigma2: f64) -> f64 {
    log_predictive_pmf_raw(pl, linpred, sigma2).max(PMF_FLOOR.ln())
}

/// Predictive probability of `pl.y` given one parameter draw.
pub fn predictive_pmf(pl: &PointLik, linpred: f64, sigma2: f64) -> f64 {
    log_predictive_pmf(pl, linpred, sigma2).exp().max(PMF_FLOOR)
}

/// Posterior-averaged predictive probability of one held-out point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScore {
    pub log_prob: f64,
    /// Some draw hit the probability floor.
    pub floored: bool,
}

/// Averages the predictive pmf over draws (before the log).
///
/// `x` must already be on the fitted design's scale; draws need stored betas.
pub fn point_score(pl: &PointLik, x: &[f64], draws: &[Draw]) -> PointScore {
    assert!(!draws.is_empty(), "scoring needs at least one draw");
    let mut floored = false;
    let logs: Vec<f64> = draws
        .iter()
        .map(|d| {
            let raw = log_predictive_pmf_raw(pl, linear_predictor(d.alpha, &d.beta, x), d.sigma2);
            if !(raw > PMF_FLOOR.ln()) {
                floored = true;
            }
            raw.max(PMF_FLOOR.ln())
        })
        .collect();
    PointScore {
        log_prob: log_sum_exp(&logs) - (draws.len() as f64).ln(),
        floored,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpsReport {
    pub lps: f64,
    pub points: Vec<PointScore>,
}

/// Log predictive score `-mean_i log p(y_i | x_i, data)` over a holdout set.
///
/// Points are scored on the current rayon pool; the result does not depend on its size.
pub fn lps(holdout: &[(PointLik, Vec<f64>)], draws: &[Draw]) -> LpsReport {
    assert!(!holdout.is_empty(), "LPS needs at least one holdout point");
    let points: Vec<PointScore> = holdout.par_iter().map(|(pl, x)| point_score(pl, x, draws)).collect();
    LpsReport {
        lps: lps_from_log_probs(points.iter().map(|p| p.log_prob)),
        points,
    }
}

/// `-mean(log_probs)`.
pub fn lps_from_log_probs(log_probs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut k) = (0.0, 0usize);
    for l in log_probs {
        s += l;
        k += 1;
    }
    -s / k as f64
}
