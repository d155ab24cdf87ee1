//! The hyper-g/n prior and the adaptive random-walk update of g.

use ullgm::g_prior::{hyper_g_over_n_cdf, hyper_g_over_n_quantile, mh_update_g, GAdaptState};
use ullgm::linear_gaussian::ModelSuffStats;
use ullgm::rng::master_rng;
use ullgm::simulation::gen_design;
use ullgm::{CenteredDesign, ModelIndicator, Standardize};

use rand::Rng;
use rand_distr::StandardNormal;

fn main() {
    let (n, a) = (200, 3.0);
    for q in [0.25, 0.5, 0.75] {
        let g = hyper_g_over_n_quantile(q, a, n);
        println!("prior q{:.0}: g = {g:.1} (cdf {:.3})", q * 100.0, hyper_g_over_n_cdf(g, a, n));
    }

    let mut rng = master_rng(6);
    let x = gen_design(n, 3, 0.3, &mut rng);
    let z: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.8 * x[(i, 0)] + 0.5 * x[(i, 2)] + 0.4 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let design = CenteredDesign::new(&x, Standardize::Center);
    let stats = ModelSuffStats::from_latent(&z, &ModelIndicator::full(3), &design).unwrap();

    let mut adapt = GAdaptState::default();
    let mut g = hyper_g_over_n_quantile(0.5, a, n);
    let mut acc = 0;
    let mut logs = Vec::new();
    for it in 0..20_000 {
        let step = mh_update_g(g, &stats, a, &mut adapt, &mut rng);
        g = step.g;
        if it >= 5_000 {
            acc += step.accepted as usize;
            logs.push(g.ln());
        }
    }
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    println!("posterior mean log g {mean:.3}, R^2 {:.3}", stats.r2);
    println!("acceptance {:.3}, proposal variance {:.3}", acc as f64 / logs.len() as f64, adapt.tau());
}
