//! Exact model posterior for a small problem next to an add-delete-swap run.

use std::collections::HashMap;

use ullgm::linear_gaussian::{LatentSummary, ModelSuffStats};
use ullgm::model_space::{enumerate_posterior, model_mh_step, ModelPrior};
use ullgm::rng::master_rng;
use ullgm::simulation::gen_design;
use ullgm::{CenteredDesign, ModelIndicator, Standardize};

use rand::Rng;
use rand_distr::StandardNormal;

fn main() {
    let (n, p) = (80, 5);
    let mut rng = master_rng(4);
    let x = gen_design(n, p, 0.5, &mut rng);
    let z: Vec<f64> = (0..n)
        .map(|i| 0.4 * x[(i, 0)] - 0.3 * x[(i, 3)] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let design = CenteredDesign::new(&x, Standardize::Center);
    let summary = LatentSummary::new(&z, &design);
    let prior = ModelPrior::new(p, 2.0).unwrap();
    let g = n as f64;
    let lm = |m: &ModelIndicator| ModelSuffStats::new(&summary, m, &design).ok().map(|s| s.log_marginal(g));

    let exact = enumerate_posterior(p, &prior, lm);

    let mut model = ModelIndicator::empty(p);
    let mut cur = lm(&model).unwrap();
    let mut visits: HashMap<ModelIndicator, usize> = HashMap::new();
    let iters = 100_000;
    for _ in 0..iters {
        cur = model_mh_step(&mut model, cur, &prior, lm, &mut rng).log_marginal;
        *visits.entry(model.clone()).or_default() += 1;
    }

    let mut rows = exact;
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("model  exact   sampled");
    for (m, pr) in rows.iter().take(8) {
        let f = visits.get(m).copied().unwrap_or(0) as f64 / iters as f64;
        println!("{m}  {pr:.4}  {f:.4}");
    }
}
