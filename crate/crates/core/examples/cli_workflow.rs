//! Drives the command line from code: simulate, fit, then score the fit.

use clap::Parser;
use ullgm::cli::Cli;

fn run(args: &[&str]) {
    let cli = Cli::parse_from(std::iter::once("ullgm").chain(args.iter().copied()));
    if let Err(e) = ullgm::cli::run(&cli) {
        panic!("ullgm {}: {}", args.join(" "), e.message());
    }
}

fn main() {
    let dir = std::env::temp_dir().join("ullgm-cli-workflow");
    let d = |s: &str| dir.join(s).display().to_string();

    run(&["simulate", "--n", "200", "--p", "10", "--seed", "1", "--out-dir", &d("sim")]);
    let data = d("sim/dataset.csv");
    run(&[
        "fit", "--input", &data, "--outcome", "y", "--iters", "4000", "--save-draws", "--out-dir", &d("fit"),
    ]);
    run(&["predict", "--fit-dir", &d("fit"), "--input", &data, "--outcome", "y", "--out-dir", &d("pred")]);

    for f in ["fit/summary.csv", "pred/lps.csv"] {
        println!("== {f}");
        print!("{}", std::fs::read_to_string(dir.join(f)).unwrap());
    }
}
