//! Binomial logistic-normal fit with a hyper-g/n prior, several chains merged.

use ullgm::chain::{run_chains, ChainConfig, PriorConfig};
use ullgm::rng::master_rng;
use ullgm::simulation::{simulate, Dgp, SimConfig};
use ullgm::{Family, GPrior};

fn main() {
    let mut cfg = SimConfig::new(250, 15, 0.6, Family::Bil, Dgp::Ullgm { sigma2: 0.2 });
    cfg.intercept = -0.5;
    let (data, truth) = simulate(&cfg, &mut master_rng(3)).unwrap();

    let prior = PriorConfig::new(GPrior::HyperGOverN { a: 3.0 }, None);
    let chain = ChainConfig::with_iters(6000, 10);
    let out = run_chains(&data, &prior, &chain, 3).unwrap();

    println!("kept draws {}", out.n_kept);
    let pips: Vec<String> = out.pip.iter().map(|p| format!("{p:.2}")).collect();
    println!("pip  {}", pips.join(" "));
    println!("true {}", truth.true_model);
    println!("g median {:.1}, sigma2 mean {:.3}", out.g.q50, out.sigma2.mean);
    println!(
        "acceptance: model {:.2}, g {:.2}, latent {:.2}",
        out.acceptance.model, out.acceptance.g, out.acceptance.latent
    );
}
