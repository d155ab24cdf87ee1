//! Log predictive score on a holdout set, with and without overdispersion.

use ullgm::chain::{run_chain, ChainConfig, PriorConfig};
use ullgm::likelihood::PointLik;
use ullgm::predictive::lps;
use ullgm::rng::master_rng;
use ullgm::simulation::{simulate, Dgp, SimConfig};
use ullgm::{Dataset, Family};

fn score(train: &Dataset, test: &Dataset, pinned: Option<f64>) -> f64 {
    let cfg = ChainConfig {
        thin: 10,
        store_beta: true,
        sigma2_pinned: pinned,
        ..ChainConfig::with_iters(4000, 5)
    };
    let out = run_chain(train, &PriorConfig::default(), &cfg).unwrap();
    let hold: Vec<(PointLik, Vec<f64>)> = (0..test.n())
        .map(|i| {
            let raw: Vec<f64> = test.x().row(i).iter().copied().collect();
            (PointLik::new(Family::Pln, test.y()[i], 0), out.transform_row(&raw))
        })
        .collect();
    lps(&hold, &out.draws).lps
}

fn main() {
    let cfg = SimConfig::new(400, 10, 0.5, Family::Pln, Dgp::Ullgm { sigma2: 0.7 });
    let (data, _) = simulate(&cfg, &mut master_rng(9)).unwrap();
    let train = data.subset(&(0..340).collect::<Vec<_>>()).unwrap();
    let test = data.subset(&(340..400).collect::<Vec<_>>()).unwrap();

    println!("LPS ullgm        {:.4}", score(&train, &test, None));
    println!("LPS sigma2 = 1e-8 {:.4}", score(&train, &test, Some(1e-8)));
}
