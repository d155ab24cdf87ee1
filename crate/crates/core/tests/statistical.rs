//! Distributional checks of the individual updates and of whole chains.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use ullgm::chain::{run_chain, ChainConfig, PriorConfig, Sampler};
use ullgm::data::{CenteredDesign, Dataset, Family, Standardize};
use ullgm::g_prior::{log_hyper_g_over_n, mh_update_g, GAdaptState, GPrior};
use ullgm::latent::{barker_update, log_target_z};
use ullgm::likelihood::PointLik;
use ullgm::linear_gaussian::{sample_alpha, LatentSummary, ModelSuffStats};
use ullgm::model::ModelIndicator;
use ullgm::model_space::{enumerate_posterior, model_mh_step, ModelPrior};
use ullgm::rng::master_rng;
use ullgm::simulation::{gen_design, gen_outcomes, Dgp, SimConfig, SimTruth};

/// Kolmogorov-Smirnov distance between draws and a cdf.
fn ks(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Cdf of an unnormalized log density by trapezoid on a fine grid.
struct GridCdf {
    xs: Vec<f64>,
    cum: Vec<f64>,
}

impl GridCdf {
    fn new(lo: f64, hi: f64, k: usize, log_f: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / k as f64;
        let xs: Vec<f64> = (0..=k).map(|i| lo + i as f64 * h).collect();
        let lf: Vec<f64> = xs.iter().map(|&x| log_f(x)).collect();
        let mx = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = lf.iter().map(|l| (l - mx).exp()).collect();
        let mut cum = vec![0.0; k + 1];
        for i in 1..=k {
            cum[i] = cum[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
        }
        let tot = cum[k];
        cum.iter_mut().for_each(|c| *c /= tot);
        GridCdf { xs, cum }
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        let k = self.xs.len() - 1;
        if x >= self.xs[k] {
            return 1.0;
        }
        let h = self.xs[1] - self.xs[0];
        let i = ((x - self.xs[0]) / h) as usize;
        let w = (x - self.xs[i]) / h;
        self.cum[i] + w * (self.cum[i + 1] - self.cum[i])
    }
}

#[test]
fn barker_matches_latent_full_conditional() {
    let cases = [
        (PointLik::new(Family::Pln, 3, 0), 0.5, 0.8),
        (PointLik::new(Family::Pln, 0, 0), 1.0, 2.0),
        (PointLik::new(Family::Bil, 7, 10), -0.5, 1.5),
        (PointLik::new(Family::Nbl { r: 2 }, 12, 0), 0.0, 1.0),
    ];
    let mut rng = master_rng(11);
    for (pl, mean, s2) in cases {
        let grid = GridCdf::new(-15.0, 15.0, 200_000, |z| log_target_z(&pl, z, mean, s2).0);
        let mut z = mean;
        let mut draws = Vec::new();
        for it in 0..200_000 {
            z = barker_update(&pl, z, mean, s2, 1.0, &mut rng).0;
            if it % 20 == 0 {
                draws.push(z);
            }
        }
        let n = draws.len() as f64;
        let d = ks(draws, |x| grid.cdf(x));
        assert!(d < 1.63 / n.sqrt(), "{pl:?}: KS {d}");
    }
}

fn g_test_stats() -> ModelSuffStats {
    let x = DMatrix::from_column_slice(6, 1, &[0.3, -1.2, 0.8, 1.9, -0.4, 0.1]);
    let z = [1.1, -0.2, 1.4, 2.5, 0.3, 0.2];
    let design = CenteredDesign::new(&x, Standardize::Center);
    ModelSuffStats::from_latent(&z, &ModelIndicator::full(1), &design).unwrap()
}

fn g_draws(stats: &ModelSuffStats, a: f64) -> Vec<f64> {
    let mut rng = master_rng(12);
    let mut adapt = GAdaptState::default();
    let mut g = 6.0;
    for _ in 0..20_000 {
        g = mh_update_g(g, stats, a, &mut adapt, &mut rng).g;
    }
    adapt.frozen = true;
    let mut out = Vec::new();
    for it in 0..400_000 {
        g = mh_update_g(g, stats, a, &mut adapt, &mut rng).g;
        if it % 20 == 0 {
            out.push(g.ln());
        }
    }
    out
}

#[test]
fn g_update_matches_quadrature() {
    let stats = g_test_stats();
    let a = 3.0;
    // density of t = log g includes the factor g
    let target = |t: f64| {
        let g = t.exp();
        log_hyper_g_over_n(g, a, 6) + stats.log_marginal(g) + t
    };
    let grid = GridCdf::new(-25.0, 40.0, 400_000, target);
    let draws = g_draws(&stats, a);
    let n = draws.len() as f64;
    let d = ks(draws.clone(), |x| grid.cdf(x));
    assert!(d < 1.63 / n.sqrt(), "KS {d}");

    // the same draws are far from the target that forgets the Jacobian
    let wrong = GridCdf::new(-25.0, 40.0, 400_000, |t| target(t) - t);
    let dw = ks(draws, |x| wrong.cdf(x));
    assert!(dw > 5.0 / n.sqrt(), "KS against the Jacobian-free target {dw}");
}

#[test]
fn gaussian_layer_moments_match_enumeration() {
    // model step, sigma2, alpha and beta with z held fixed, against the exact mixture
    let (n, p) = (20, 3);
    let mut rng = master_rng(13);
    let x = gen_design(n, p, 0.3, &mut rng);
    let z: Vec<f64> = (0..n)
        .map(|i| 0.5 + 0.8 * x[(i, 0)] - 0.3 * x[(i, 1)] + 0.7 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let g = 20.0;
    let prior = ModelPrior::new(p, 1.5).unwrap();
    let design = CenteredDesign::new(&x, Standardize::Center);
    let summary = LatentSummary::new(&z, &design);
    let stats = |m: &ModelIndicator| ModelSuffStats::new(&summary, m, &design).unwrap();
    let post = enumerate_posterior(p, &prior, |m| Some(stats(m).log_marginal(g)));

    let mut exact_beta = vec![0.0; p];
    let mut exact_s2 = 0.0;
    for (m, pr) in &post {
        let s = stats(m);
        for (&j, b) in s.cols().iter().zip(s.beta_mean(g).iter()) {
            exact_beta[j] += pr * b;
        }
        let (shape, rate) = s.sigma2_gamma_params(g);
        exact_s2 += pr * rate / (shape - 1.0);
    }

    let mut model = ModelIndicator::empty(p);
    let mut cur = stats(&model);
    let iters = 200_000;
    let mut beta_sum = vec![0.0; p];
    let (mut s2_sum, mut alpha_sum) = (0.0, 0.0);
    for _ in 0..iters {
        let lm = cur.log_marginal(g);
        let step = model_mh_step(&mut model, lm, &prior, |m| Some(stats(m).log_marginal(g)), &mut rng);
        if step.accepted {
            cur = stats(&model);
        }
        let s2 = cur.sample_sigma2(g, &mut rng);
        alpha_sum += sample_alpha(summary.zbar, s2, n, &mut rng);
        for (&j, b) in cur.cols().iter().zip(cur.sample_beta(s2, g, &mut rng).iter()) {
            beta_sum[j] += b;
        }
        s2_sum += s2;
    }
    let it = iters as f64;
    for j in 0..p {
        let est = beta_sum[j] / it;
        assert!((est - exact_beta[j]).abs() < 0.01, "beta_{j}: {est} vs {}", exact_beta[j]);
    }
    assert!((s2_sum / it / exact_s2 - 1.0).abs() < 0.01, "{} vs {exact_s2}", s2_sum / it);
    assert!((alpha_sum / it - summary.zbar).abs() < 0.005);
}

fn pln_data(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = master_rng(seed);
    let x = gen_design(n, p, 0.4, &mut rng);
    let mut beta_star = vec![0.0; p];
    beta_star[0] = 0.5;
    beta_star[1] = -0.3;
    let truth = SimTruth {
        true_model: ModelIndicator::from_indices(p, &[0, 1]),
        beta_star,
        intercept: 1.0,
        noise_variance: 0.3,
    };
    let cfg = SimConfig::new(n, p, 0.4, Family::Pln, Dgp::Ullgm { sigma2: 0.3 });
    gen_outcomes(&x, &truth, &cfg, &mut rng)
}

#[test]
fn adaptation_reaches_targets() {
    let data = pln_data(200, 5, 14);
    let prior = PriorConfig::new(GPrior::HyperGOverN { a: 3.0 }, None);
    let out = run_chain(&data, &prior, &ChainConfig::with_iters(6000, 3)).unwrap();
    assert!((out.acceptance.latent - 0.57).abs() < 0.05, "{:?}", out.acceptance);
    assert!((out.acceptance.g - 0.234).abs() < 0.05, "{:?}", out.acceptance);
}

#[test]
fn chains_are_reproducible() {
    let data = pln_data(120, 6, 15);
    let prior = PriorConfig::new(GPrior::HyperGOverN { a: 3.0 }, Some(2.0));
    let cfg = ChainConfig {
        store_beta: true,
        ..ChainConfig::with_iters(800, 21)
    };
    let a = run_chain(&data, &prior, &cfg).unwrap();
    let b = run_chain(&data, &prior, &cfg).unwrap();
    assert_eq!(a, b);
    let threaded = run_chain(&data, &prior, &ChainConfig { threads: 2, ..cfg.clone() }).unwrap();
    assert_eq!(a, threaded);
    let other = run_chain(&data, &prior, &ChainConfig { seed: 22, ..cfg }).unwrap();
    assert_ne!(a.sigma2, other.sigma2);
}

#[test]
fn frozen_steps_stay_fixed() {
    let data = pln_data(50, 3, 16);
    let prior = PriorConfig::default();
    let cfg = ChainConfig::with_iters(100, 1);
    let mut s = Sampler::new(&data, &prior, &cfg).unwrap();
    for _ in 0..50 {
        s.step().unwrap();
    }
    s.freeze_adaptation();
    let before = s.latent_steps();
    for _ in 0..50 {
        s.step().unwrap();
    }
    assert_eq!(before, s.latent_steps());
}

#[test]
fn sigma2_recovered_on_moderate_data() {
    let data = pln_data(600, 4, 17);
    let out = run_chain(&data, &PriorConfig::default(), &ChainConfig::with_iters(6000, 5)).unwrap();
    assert!((out.sigma2.mean - 0.3).abs() < 0.08, "{:?}", out.sigma2);
    assert!(out.pip[0] > 0.99 && out.pip[1] > 0.99, "{:?}", out.pip);
}

#[test]
fn column_permutation_permutes_pips() {
    // exact enumeration on fixed z, so the comparison is free of Monte Carlo noise
    let (n, p) = (40, 5);
    let mut rng = master_rng(18);
    let x = gen_design(n, p, 0.5, &mut rng);
    let z: Vec<f64> = (0..n)
        .map(|i| 0.6 * x[(i, 1)] - 0.4 * x[(i, 3)] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let perm = [3, 0, 4, 1, 2];
    let xp = DMatrix::from_fn(n, p, |i, j| x[(i, perm[j])]);
    let prior = ModelPrior::new(p, 2.0).unwrap();
    let pips = |x: &DMatrix<f64>| {
        let design = CenteredDesign::new(x, Standardize::Zscore);
        let summary = LatentSummary::new(&z, &design);
        let post = enumerate_posterior(p, &prior, |m| {
            ModelSuffStats::new(&summary, m, &design).ok().map(|s| s.log_marginal(n as f64))
        });
        let mut pip = vec![0.0; p];
        for (m, pr) in post {
            for &j in m.included() {
                pip[j] += pr;
            }
        }
        pip
    };
    let (a, b) = (pips(&x), pips(&xp));
    for j in 0..p {
        assert!((b[j] - a[perm[j]]).abs() < 1e-10);
    }
}
