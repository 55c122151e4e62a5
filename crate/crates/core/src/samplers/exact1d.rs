use rand::Rng;

use super::{bernoulli_accept, empty_config, Iteration};
use crate::geometry::{SpaceSpec, Sphere};
use crate::samplers::BlockedRegion1D;
use crate::weights::WeightTable;

/// Fixed-radius importance sampler on the line or circle: each center is
/// uniform on the complement of the region blocked by earlier centers.
pub(crate) fn iteration<R: Rng + ?Sized>(space: &SpaceSpec, table: Option<&WeightTable>, rng: &mut R) -> Iteration {
    let table = table.expect("is-1d sampler carries a weight table");
    let a = space.max_radius();
    let m = table.sample_m(rng);
    let mut cfg = empty_config(space);
    let mut region = BlockedRegion1D::new(space.metric);
    let mut log_lr = 0.0;
    for i in 0..m {
        let blocked = region.blocked_length();
        let Some(x) = region.sample_complement(rng) else {
            bernoulli_accept(0.0, rng);
            return Iteration { accepted: None, spheres: i as u64, cells_touched: 0 };
        };
        log_lr += (-blocked).ln_1p();
        region.insert(x, 2.0 * a);
        cfg.insert(Sphere::new(i as u64, [x].as_slice(), a));
    }
    let p = (log_lr - table.log_weights[m]).exp();
    let ok = bernoulli_accept(p, rng);
    Iteration { accepted: ok.then_some(cfg), spheres: m as u64, cells_touched: 0 }
}
