//! Fit a Poisson log-normal model to simulated counts and print the PIPs.

use ullgm::chain::{run_chain, ChainConfig, PriorConfig};
use ullgm::rng::master_rng;
use ullgm::simulation::{simulate, Dgp, SimConfig};
use ullgm::{Family, GPrior};

fn main() {
    let cfg = SimConfig::new(300, 12, 0.5, Family::Pln, Dgp::Ullgm { sigma2: 0.3 });
    let (data, truth) = simulate(&cfg, &mut master_rng(1)).unwrap();

    let prior = PriorConfig::new(GPrior::Uip, Some(4.0));
    let out = run_chain(&data, &prior, &ChainConfig::with_iters(10_000, 2)).unwrap();

    println!("{:<6} {:>6} {:>9} {:>9}", "name", "pip", "mean", "truth");
    for j in 0..data.p() {
        println!(
            "{:<6} {:>6.3} {:>9.4} {:>9.4}",
            data.names()[j],
            out.pip[j],
            out.beta_mean[j],
            truth.beta_star[j]
        );
    }
    println!("alpha  {:.3} (sd {:.3})", out.alpha.mean, out.alpha.sd);
    println!("sigma2 {:.3} [{:.3}, {:.3}]", out.sigma2.mean, out.sigma2.q025, out.sigma2.q975);
    println!("mean model size {:.2}", out.mean_model_size());
    for (m, f) in out.top_models(3) {
        println!("{m}  {f:.3}");
    }
}
