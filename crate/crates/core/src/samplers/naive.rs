use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{bernoulli_accept, empty_config, random_sphere, Iteration};
use crate::geometry::SpaceSpec;

/// Poisson count, uniform centers, reject at the first overlap.
pub(crate) fn iteration<R: Rng + ?Sized>(space: &SpaceSpec, rng: &mut R) -> Iteration {
    let m = poisson_count(space.lambda, rng);
    let mut cfg = empty_config(space);
    for i in 0..m {
        let s = random_sphere(space, i, rng);
        if cfg.overlaps_any(&s) {
            bernoulli_accept(0.0, rng);
            return Iteration { accepted: None, spheres: i + 1, cells_touched: 0 };
        }
        cfg.insert(s);
    }
    bernoulli_accept(1.0, rng);
    Iteration { accepted: Some(cfg), spheres: m, cells_touched: 0 }
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let p = Poisson::new(lambda).expect("lambda validated positive and finite");
    let draw: f64 = p.sample(rng);
    draw as u64
}
