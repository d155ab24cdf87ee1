//! Per-observation likelihoods `P(y | h(z))` and their z-gradients, plus the
//! moment formulas used to read `sigma^2` as a dispersion parameter.

use crate::data::Family;
use crate::special::{ln_choose, ln_factorial, norm_cdf};

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{-x})`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic-to-probit matching constant: `logistic(x) ~ Phi(b x)`.
pub const PROBIT_MATCH_B: f64 = 0.626_657_068_657_750_1; // sqrt(pi / 8)

/// One observation's likelihood as a function of its latent value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLik {
    pub family: Family,
    pub y: u64,
    /// Trials `N_i` (BiL only; ignored otherwise).
    pub trials: u64,
}

impl PointLik {
    pub fn new(family: Family, y: u64, trials: u64) -> Self {
        PointLik { family, y, trials }
    }

    /// Whether `y` lies in the support.
    pub fn in_support(&self) -> bool {
        match self.family {
            Family::Bil => self.y <= self.trials,
            _ => true,
        }
    }

    /// z-dependent part of the log pmf; [`log_pmf`](Self::log_pmf) adds the constant.
    #[inline]
    pub fn log_kernel(&self, z: f64) -> f64 {
        let y = self.y as f64;
        match self.family {
            Family::Pln => y * z - z.exp(),
            Family::Bil => y * z - self.trials as f64 * softplus(z),
            Family::Nbl { r } => {
                let r = r as f64;
                r * z - (r + y) * softplus(z)
            }
        }
    }

    /// Normalizing constant of the pmf in `y` (the combinatorial part).
    pub fn log_const(&self) -> f64 {
        match self.family {
            Family::Pln => -ln_factorial(self.y),
            Family::Bil => ln_choose(self.trials, self.y),
            Family::Nbl { r } => ln_choose(r as u64 + self.y - 1, self.y),
        }
    }

    /// `log P(y | h(z))`; `-inf` outside the support.
    pub fn log_pmf(&self, z: f64) -> f64 {
        if !self.in_support() {
            return f64::NEG_INFINITY;
        }
        self.log_const() + self.log_kernel(z)
    }

    /// `d/dz log P(y | h(z))`.
    #[inline]
    pub fn grad_log_pmf(&self, z: f64) -> f64 {
        let y = self.y as f64;
        match self.family {
            Family::Pln => y - z.exp(),
            Family::Bil => y - self.trials as f64 * logistic(z),
            Family::Nbl { r } => r as f64 - (r as f64 + y) * logistic(z),
        }
    }
}

/// Mean, variance and dispersion index of a PLN outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlnMoments {
    pub mean: f64,
    pub variance: f64,
    pub dispersion: f64,
}

/// Moments of `y` under PLN with linear predictor `alpha + x'beta` and latent variance `sigma2`.
pub fn pln_moments(linpred: f64, sigma2: f64) -> PlnMoments {
    let mean = (linpred + 0.5 * sigma2).exp();
    let excess = sigma2.exp_m1();
    PlnMoments {
        mean,
        variance: mean + mean * mean * excess,
        dispersion: 1.0 + mean * excess,
    }
}

/// Probit-matched approximation of the BiL mean, `N Phi(b mu / sqrt(1 + b^2 sigma2))`.
pub fn bil_mean_approx(linpred: f64, sigma2: f64, trials: u64) -> f64 {
    let b = PROBIT_MATCH_B;
    trials as f64 * norm_cdf(b * linpred / (1.0 + b * b * sigma2).sqrt())
}

/// Linear predictor `alpha + x'beta` from a full-length coefficient vector.
pub fn linear_predictor(alpha: f64, beta: &[f64], x: &[f64]) -> f64 {
    alpha + beta.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(pl: &PointLik, z: f64) -> f64 {
        // five-point central difference
        let h = 1e-4;
        (-pl.log_pmf(z + 2.0 * h) + 8.0 * pl.log_pmf(z + h) - 8.0 * pl.log_pmf(z - h)
            + pl.log_pmf(z - 2.0 * h))
            / (12.0 * h)
    }

    #[test]
    fn pmf_point_values() {
        assert!((PointLik::new(Family::Pln, 0, 0).log_pmf(0.0) + 1.0).abs() < 1e-15);
        assert!((PointLik::new(Family::Bil, 1, 2).log_pmf(0.0) - 0.5f64.ln()).abs() < 1e-14);
        assert!((PointLik::new(Family::Nbl { r: 1 }, 0, 0).log_pmf(0.0) - 0.5f64.ln()).abs() < 1e-14);
        assert_eq!(PointLik::new(Family::Bil, 3, 2).log_pmf(0.3), f64::NEG_INFINITY);
    }

    #[test]
    fn gradient_point_values() {
        assert!(PointLik::new(Family::Pln, 2, 0).grad_log_pmf(2f64.ln()).abs() < 1e-15);
        assert_eq!(PointLik::new(Family::Bil, 3, 6).grad_log_pmf(0.0), 0.0);
        let g = PointLik::new(Family::Pln, 0, 0).grad_log_pmf(1.0);
        assert!((g + std::f64::consts::E).abs() < 1e-15);
        assert!((fd(&PointLik::new(Family::Pln, 0, 0), 1.0) - g).abs() < 1e-7);
    }

    #[test]
    fn bil_pmf_sums_to_one_and_is_symmetric() {
        for n in [1u64, 7, 30, 60] {
            for z in [-4.0, -0.3, 0.0, 2.5] {
                let lse = log_sum_exp((0..=n).map(|y| PointLik::new(Family::Bil, y, n).log_pmf(z)));
                assert!(lse.abs() < 1e-10, "n={n} z={z} lse={lse}");
                for y in 0..=n {
                    let a = PointLik::new(Family::Bil, y, n).log_pmf(z);
                    let b = PointLik::new(Family::Bil, n - y, n).log_pmf(-z);
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn pln_pmf_sums_to_one() {
        for z in [-3.0, 0.0, 1.5, 4.0] {
            let top = (10.0 * f64::exp(z) + 100.0) as u64;
            let lse = log_sum_exp((0..=top).map(|y| PointLik::new(Family::Pln, y, 0).log_pmf(z)));
            assert!(lse.abs() < 1e-8);
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pln_moment_values() {
        let m = pln_moments(0.0, 0.0);
        assert_eq!((m.mean, m.variance, m.dispersion), (1.0, 1.0, 1.0));
        let m = pln_moments(0.0, 0.2);
        assert!((m.mean - 1.105_170_918).abs() < 1e-8);
        assert!((m.dispersion - 1.244_687_889_5).abs() < 1e-9);
        let mut last = 0.0;
        for k in 0..50 {
            let d = pln_moments(0.3, k as f64 * 0.05).dispersion;
            assert!(d > last || k == 0);
            last = d;
        }
    }

    #[test]
    fn bil_mean_symmetric_and_close_to_logistic() {
        assert_eq!(bil_mean_approx(0.0, 1.7, 30), 15.0);
        let exact = 30.0 * logistic(1.0);
        assert!((bil_mean_approx(1.0, 0.0, 30) / exact - 1.0).abs() < 0.01);
    }

    fn log_sum_exp(it: impl Iterator<Item = f64>) -> f64 {
        let v: Vec<f64> = it.collect();
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }
}
