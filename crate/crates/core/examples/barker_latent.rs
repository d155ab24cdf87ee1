//! Barker updates of one latent value with Robbins-Monro step adaptation.

use ullgm::latent::{barker_update, LatentAdaptState};
use ullgm::likelihood::PointLik;
use ullgm::rng::master_rng;
use ullgm::Family;

fn main() {
    let pl = PointLik::new(Family::Pln, 40, 0);
    let (mean, sigma2) = (1.0, 0.5);
    let mut rng = master_rng(8);
    let mut adapt = LatentAdaptState::new(1);
    let mut z = mean;

    for block in 0..6 {
        let mut acc = 0;
        for _ in 0..2000 {
            let (zn, ok) = barker_update(&pl, z, mean, sigma2, adapt.step(0), &mut rng);
            z = zn;
            acc += ok as usize;
            adapt.adapt(&[ok]);
        }
        println!("block {block}: step {:.3}, acceptance {:.3}, z {z:.3}", adapt.step(0), acc as f64 / 2000.0);
    }
}
