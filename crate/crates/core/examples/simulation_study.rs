//! One replicate of the PLN simulation design: n = 1000, p = 50, rho = 0.6.

use std::time::Instant;

use ullgm::chain::{run_chain, ChainConfig, PriorConfig};
use ullgm::rng::master_rng;
use ullgm::simulation::{metrics, simulate, Dgp, MetricsReport, SimConfig};
use ullgm::{Family, GPrior};

fn main() {
    let iters: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let cfg = SimConfig::new(1000, 50, 0.6, Family::Pln, Dgp::Ullgm { sigma2: 0.2 });
    let seed: u64 = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(7);
    let (data, truth) = simulate(&cfg, &mut master_rng(seed)).expect("valid config");

    let prior = PriorConfig::new(GPrior::Uip, Some(5.0));
    let chain = ChainConfig {
        burn_in: iters * 5 / 6,
        ..ChainConfig::with_iters(iters, 11)
    };
    let t = Instant::now();
    let out = run_chain(&data, &prior, &chain).expect("chain runs");
    let m = metrics(&out, &truth, t.elapsed().as_secs_f64());

    println!("{}", MetricsReport::COLUMNS.join("\t"));
    let row: Vec<String> = m.values().iter().map(|v| format!("{v:.3}")).collect();
    println!("{}", row.join("\t"));
    println!("latent acceptance {:.3}", out.acceptance.latent);
}
