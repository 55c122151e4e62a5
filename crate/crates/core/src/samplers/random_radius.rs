//! Random-radius importance sampler with the two-component split on the
//! mean of the first `floor(M δ)` values of `R^d`.

use rand::Rng;
use smallvec::SmallVec;

use super::{bernoulli_accept, empty_config, uniform_point, BlockedRegion1D, GridState, Iteration};
use crate::geometry::{Point, SpaceSpec, Sphere};
use crate::radius::sample_tilted;
use crate::weights::WeightTable;

pub(crate) fn iteration<R: Rng + ?Sized>(space: &SpaceSpec, table: Option<&WeightTable>, rng: &mut R) -> Iteration {
    let table = table.expect("rr-is sampler carries a weight table");
    let tilt = table.tilt.as_ref().expect("random-radius table has a tilt");
    let dim = space.dim;
    let di = dim as i32;
    let law = &space.radius_law;
    let scale = space.scale();

    let m = table.sample_m(rng);
    let j = table.sample_component(m, rng);
    let k = (m as f64 * table.delta).floor() as usize;
    let small_n = (m as f64) <= 1.0 / table.delta;

    // radii first: x = R^d, tilted for the first k under component 2
    let mut log_radius_lr = 0.0;
    let pows: Vec<f64> = (0..m)
        .map(|i| {
            if !small_n && j == 2 && i < k {
                let x = sample_tilted(tilt, law, dim, rng);
                log_radius_lr += tilt.log_lr_factor(x);
                x
            } else {
                law.sample(dim, rng).powi(di)
            }
        })
        .collect();
    let radii: Vec<f64> = pows.iter().map(|&x| x.powf(1.0 / dim as f64) / scale).collect();

    if small_n {
        let mut cfg = empty_config(space);
        for (i, &r) in radii.iter().enumerate() {
            let s = Sphere::new(i as u64, uniform_point(dim, rng), r);
            if cfg.overlaps_any(&s) {
                bernoulli_accept(0.0, rng);
                return Iteration { accepted: None, spheres: i as u64 + 1, cells_touched: 0 };
            }
            cfg.insert(s);
        }
        bernoulli_accept(1.0, rng);
        return Iteration { accepted: Some(cfg), spheres: m as u64, cells_touched: 0 };
    }

    let prefix_mean = pows[..k].iter().sum::<f64>() / k as f64;
    let in_part = if j == 1 { prefix_mean >= tilt.rho } else { prefix_mean < tilt.rho };
    if !in_part {
        bernoulli_accept(0.0, rng);
        return Iteration { accepted: None, spheres: 0, cells_touched: 0 };
    }

    let mut cfg = empty_config(space);
    let mut centers: Vec<Point> = Vec::with_capacity(m);
    let mut log_place_lr = 0.0;
    let mut cells_touched = 0;
    let mut region = BlockedRegion1D::new(space.metric);
    let mut grid = (dim > 1).then(|| GridState::new(dim, space.metric, table.grid_cells[m]));

    for i in 0..m {
        let ri = radii[i];
        let (blocked, x) = if let Some(grid) = grid.as_mut() {
            grid.reset();
            for (c, &rj) in centers.iter().zip(&radii) {
                grid.mark_ball(c, rj + ri);
            }
            (grid.blocked_volume(), grid.sample_point(rng))
        } else {
            region.clear();
            for (c, &rj) in centers.iter().zip(&radii) {
                region.insert(c[0], rj + ri);
            }
            let x = region.sample_complement(rng).map(|x| SmallVec::from_slice(&[x]));
            (region.blocked_length(), x)
        };
        let Some(x) = x else {
            bernoulli_accept(0.0, rng);
            return Iteration { accepted: None, spheres: i as u64, cells_touched };
        };
        log_place_lr += (-blocked).ln_1p();
        let s = Sphere::new(i as u64, x.clone(), ri);
        if cfg.overlaps_any(&s) {
            bernoulli_accept(0.0, rng);
            let touched = grid.as_ref().map_or(0, |g| g.cells_touched());
            return Iteration { accepted: None, spheres: i as u64 + 1, cells_touched: touched };
        }
        cfg.insert(s);
        centers.push(x);
        cells_touched = grid.as_ref().map_or(0, |g| g.cells_touched());
    }

    let (s1, s2) = table.components[m];
    let sigma = if j == 1 { s1 } else { s2 };
    let p = (log_place_lr + log_radius_lr - sigma.ln()).exp();
    let ok = bernoulli_accept(p, rng);
    Iteration { accepted: ok.then_some(cfg), spheres: m as u64, cells_touched }
}
