//! Per-observation latent updates with the adaptive Barker proposal.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::likelihood::{logistic, softplus, PointLik};
use crate::rng::ChainRng;

pub const LATENT_TARGET_ACC: f64 = 0.57;
pub const DEFAULT_KAPPA: f64 = 0.6;

/// Robbins-Monro state for the per-observation step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentAdaptState {
    pub log_step: Vec<f64>,
    pub iter: u64,
    pub target_acc: f64,
    pub kappa: f64,
    pub frozen: bool,
}

impl LatentAdaptState {
    /// Unit initial steps for `n` observations.
    pub fn new(n: usize) -> Self {
        LatentAdaptState {
            log_step: vec![0.0; n],
            iter: 0,
            target_acc: LATENT_TARGET_ACC,
            kappa: DEFAULT_KAPPA,
            frozen: false,
        }
    }

    pub fn step(&self, i: usize) -> f64 {
        self.log_step[i].exp()
    }

    /// Gain used by the next adaptation, `(iter + 1)^-kappa`.
    pub fn next_gain(&self) -> f64 {
        ((self.iter + 1) as f64).powf(-self.kappa)
    }

    /// Moves every log step by `gain * (accepted_i - target)`.
    pub fn adapt(&mut self, accepted: &[bool]) {
        if self.frozen {
            return;
        }
        let gain = self.next_gain();
        self.iter += 1;
        for (ls, &a) in self.log_step.iter_mut().zip(accepted) {
            *ls += gain * (f64::from(u8::from(a)) - self.target_acc);
        }
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }
}

/// Log full conditional of `z_i` (up to a constant) and its derivative.
#[inline]
pub fn log_target_z(pl: &PointLik, z: f64, mean: f64, sigma2: f64) -> (f64, f64) {
    let r = z - mean;
    (
        pl.log_kernel(z) - r * r / (2.0 * sigma2),
        pl.grad_log_pmf(z) - r / sigma2,
    )
}

/// One Barker Metropolis-Hastings step for a scalar target returning `(log density, gradient)`.
///
/// A non-finite gradient at the current point switches to a symmetric random
/// walk with the same step.
pub fn barker_step<R, F>(z: f64, step: f64, target: F, rng: &mut R) -> (f64, bool)
where
    R: Rng + ?Sized,
    F: Fn(f64) -> (f64, f64),
{
    let (l0, g0) = target(z);
    let xi = step * rng.sample::<f64, _>(StandardNormal);
    let u: f64 = rng.random();
    let (zs, log_acc) = if g0.is_finite() {
        let zs = if u < logistic(xi * g0) { z + xi } else { z - xi };
        let (l1, g1) = target(zs);
        if !g1.is_finite() {
            return (z, false);
        }
        let d = zs - z;
        (zs, l1 - l0 + softplus(-d * g0) - softplus(d * g1))
    } else {
        let zs = z + xi;
        (zs, target(zs).0 - l0)
    };
    if log_acc.is_nan() {
        return (z, false);
    }
    let v: f64 = rng.random();
    if log_acc >= 0.0 || v.ln() < log_acc {
        (zs, true)
    } else {
        (z, false)
    }
}

/// Barker update of `z_i` under its full conditional.
pub fn barker_update<R: Rng + ?Sized>(
    pl: &PointLik,
    z: f64,
    mean: f64,
    sigma2: f64,
    step: f64,
    rng: &mut R,
) -> (f64, bool) {
    barker_step(z, step, |v| log_target_z(pl, v, mean, sigma2), rng)
}

/// Updates every latent value once, each with its own random stream, then adapts.
///
/// `means[i]` is `alpha + x_i'beta`. Results do not depend on `parallel`.
/// Returns the number of accepted moves.
#[allow(clippy::too_many_arguments)]
pub fn update_all_latents(
    z: &mut [f64],
    liks: &[PointLik],
    means: &[f64],
    sigma2: f64,
    adapt: &mut LatentAdaptState,
    rngs: &mut [ChainRng],
    accepted: &mut Vec<bool>,
    parallel: bool,
) -> usize {
    let n = z.len();
    accepted.clear();
    accepted.resize(n, false);
    let steps = &adapt.log_step;
    let work = |(((zi, acc), rng), i): (((&mut f64, &mut bool), &mut ChainRng), usize)| {
        let (nz, a) = barker_update(&liks[i], *zi, means[i], sigma2, steps[i].exp(), rng);
        *zi = nz;
        *acc = a;
    };
    if parallel {
        z.par_iter_mut()
            .zip(accepted.par_iter_mut())
            .zip(rngs.par_iter_mut())
            .zip(0..n)
            .for_each(work);
    } else {
        z.iter_mut()
            .zip(accepted.iter_mut())
            .zip(rngs.iter_mut())
            .zip(0..n)
            .for_each(work);
    }
    adapt.adapt(accepted);
    accepted.iter().filter(|&&a| a).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Family;
    use crate::rng::{master_rng, observation_rngs};

    #[test]
    fn pln_target_gradient_zero_at_mode() {
        let pl = PointLik::new(Family::Pln, 1, 0);
        assert_eq!(log_target_z(&pl, 0.0, 0.0, 1.0).1, 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-4;
        for fam in [Family::Pln, Family::Bil, Family::Nbl { r: 3 }] {
            let pl = PointLik::new(fam, 4, 9);
            for z in [-2.0, 0.3, 1.7] {
                let f = |v: f64| log_target_z(&pl, v, 0.4, 0.7).0;
                let fd = (-f(z + 2.0 * h) + 8.0 * f(z + h) - 8.0 * f(z - h) + f(z - 2.0 * h)) / (12.0 * h);
                let g = log_target_z(&pl, z, 0.4, 0.7).1;
                assert!((fd - g).abs() / g.abs().max(1.0) < 1e-6);
            }
        }
    }

    #[test]
    fn flat_prior_limit() {
        let pl = PointLik::new(Family::Pln, 3, 0);
        let g = log_target_z(&pl, 0.5, -2.0, 1e15).1;
        assert!((g - pl.grad_log_pmf(0.5)).abs() < 1e-12);
    }

    #[test]
    fn standard_normal_stationarity() {
        let mut rng = master_rng(11);
        let target = |v: f64| (-0.5 * v * v, -v);
        let (mut z, mut s, mut s2) = (0.0, 0.0, 0.0);
        let n = 400_000;
        for _ in 0..n {
            z = barker_step(z, 1.5, target, &mut rng).0;
            s += z;
            s2 += z * z;
        }
        let m = s / n as f64;
        let v = s2 / n as f64 - m * m;
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((v - 1.0).abs() < 0.03, "var {v}");
    }

    #[test]
    fn random_walk_fallback_keeps_target() {
        // infinite gradient everywhere forces the symmetric branch
        let mut rng = master_rng(12);
        let target = |v: f64| (-0.5 * v * v, f64::INFINITY);
        let (mut z, mut s2) = (0.0, 0.0);
        let n = 200_000;
        for _ in 0..n {
            z = barker_step(z, 2.0, target, &mut rng).0;
            s2 += z * z;
        }
        assert!((s2 / n as f64 - 1.0).abs() < 0.05);
    }

    #[test]
    fn adaptation_diminishes() {
        let mut a = LatentAdaptState::new(1);
        a.iter = 99_999;
        let before = a.log_step[0];
        a.adapt(&[true]);
        assert!((a.log_step[0] - before).abs() < 1e-3);
        a.freeze();
        a.adapt(&[false]);
        assert_eq!(a.iter, 100_000);
    }

    #[test]
    fn sweep_is_order_independent_and_thread_independent() {
        let n = 64;
        let liks: Vec<PointLik> = (0..n).map(|i| PointLik::new(Family::Pln, (i % 7) as u64, 0)).collect();
        let means: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let run = |parallel: bool| {
            let mut z = vec![0.2; n];
            let mut adapt = LatentAdaptState::new(n);
            let mut rngs = observation_rngs(5, n);
            let mut acc = Vec::new();
            for _ in 0..20 {
                update_all_latents(&mut z, &liks, &means, 0.3, &mut adapt, &mut rngs, &mut acc, parallel);
            }
            (z, adapt.log_step)
        };
        assert_eq!(run(false), run(true));
    }
}
