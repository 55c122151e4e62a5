//! Grid approximation of the blocked region.
//!
//! A cell is blocked when every point of it lies strictly within the
//! blocking distance of some earlier center. Blocked marks are stamped
//! with a generation counter so a reset is O(1).

use rand::Rng;
use smallvec::SmallVec;

use super::{axis_gap, bernoulli_accept, empty_config, Iteration};
use crate::geometry::{Metric, Point, SpaceSpec, Sphere};
use crate::weights::WeightTable;

const REJECTION_TRIES: usize = 64;

#[derive(Debug, Clone)]
pub struct GridState {
    dim: usize,
    metric: Metric,
    per_side: usize,
    stamp: Vec<u32>,
    generation: u32,
    blocked: usize,
    cells_touched: u64,
}

impl GridState {
    pub fn new(dim: usize, metric: Metric, per_side: usize) -> Self {
        let mut g = GridState { dim, metric, per_side: 0, stamp: Vec::new(), generation: 1, blocked: 0, cells_touched: 0 };
        g.resize(per_side);
        g
    }

    /// Switches to `per_side` cells per axis and clears every mark.
    pub fn resize(&mut self, per_side: usize) {
        assert!(per_side > 0, "grid needs at least one cell per side");
        let total = per_side
            .checked_pow(self.dim as u32)
            .filter(|&t| t <= 1 << 31)
            .unwrap_or_else(|| panic!("grid of {per_side}^{} cells is too large", self.dim));
        if per_side != self.per_side {
            self.per_side = per_side;
            self.stamp.clear();
            self.stamp.resize(total, 0);
            self.generation = 1;
            self.blocked = 0;
        } else {
            self.reset();
        }
    }

    pub fn reset(&mut self) {
        self.blocked = 0;
        if self.generation == u32::MAX {
            self.stamp.fill(0);
            self.generation = 1;
        } else {
            self.generation += 1;
        }
    }

    pub fn per_side(&self) -> usize {
        self.per_side
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.per_side as f64
    }

    pub fn total_cells(&self) -> usize {
        self.stamp.len()
    }

    pub fn blocked_cells(&self) -> usize {
        self.blocked
    }

    pub fn blocked_volume(&self) -> f64 {
        self.blocked as f64 / self.stamp.len() as f64
    }

    pub fn cells_touched(&self) -> u64 {
        self.cells_touched
    }

    pub fn is_blocked(&self, cell: usize) -> bool {
        self.stamp[cell] == self.generation
    }

    pub fn cell_of(&self, point: &[f64]) -> usize {
        point.iter().fold(0, |acc, &x| {
            let k = ((x * self.per_side as f64) as usize).min(self.per_side - 1);
            acc * self.per_side + k
        })
    }

    /// Corner coordinates of a cell.
    pub fn cell_origin(&self, cell: usize) -> Point {
        let mut out: Point = SmallVec::from_elem(0.0, self.dim);
        let mut rest = cell;
        for axis in (0..self.dim).rev() {
            out[axis] = (rest % self.per_side) as f64 * self.eps();
            rest /= self.per_side;
        }
        out
    }

    /// Largest per-axis distance from `c` to a point of `[lo, lo + eps]`.
    fn farthest_gap(&self, c: f64, k: usize) -> f64 {
        let eps = self.eps();
        let (lo, hi) = (k as f64 * eps, (k + 1) as f64 * eps);
        match self.metric {
            Metric::Euclidean => (c - lo).abs().max((hi - c).abs()),
            Metric::Torus => {
                let anti = (c + 0.5).rem_euclid(1.0);
                if (lo..=hi).contains(&anti) {
                    0.5
                } else {
                    axis_gap(Metric::Torus, c, lo).max(axis_gap(Metric::Torus, c, hi))
                }
            }
        }
    }

    /// Marks every cell lying strictly within `reach` of `center`.
    pub fn mark_ball(&mut self, center: &[f64], reach: f64) {
        let g = self.per_side;
        let eps = self.eps();
        let r2 = reach * reach;
        let mut axes: SmallVec<[Vec<(usize, f64)>; 4]> = SmallVec::new();
        for &c in center {
            let lo = ((c - reach) / eps).floor() as i64;
            let hi = ((c + reach) / eps).floor() as i64;
            let mut cand = Vec::new();
            let push = |k: usize, cand: &mut Vec<(usize, f64)>| {
                let f = self.farthest_gap(c, k);
                if f * f < r2 {
                    cand.push((k, f * f));
                }
            };
            match self.metric {
                Metric::Torus if hi - lo + 1 >= g as i64 => (0..g).for_each(|k| push(k, &mut cand)),
                Metric::Torus => (lo..=hi).for_each(|k| push(k.rem_euclid(g as i64) as usize, &mut cand)),
                Metric::Euclidean => (lo.max(0)..=hi.min(g as i64 - 1)).for_each(|k| push(k as usize, &mut cand)),
            }
            if cand.is_empty() {
                return;
            }
            axes.push(cand);
        }

        // odometer over the per-axis candidates with running partial sums
        let dim = self.dim;
        let mut idx: SmallVec<[usize; 4]> = SmallVec::from_elem(0, dim);
        let mut partial: SmallVec<[f64; 5]> = SmallVec::from_elem(0.0, dim + 1);
        let mut depth = 0;
        loop {
            if depth == dim {
                self.cells_touched += 1;
                let cell = idx.iter().enumerate().fold(0, |acc, (ax, &i)| acc * g + axes[ax][i].0);
                if self.stamp[cell] != self.generation {
                    self.stamp[cell] = self.generation;
                    self.blocked += 1;
                }
                depth -= 1;
                idx[depth] += 1;
                continue;
            }
            if idx[depth] >= axes[depth].len() {
                if depth == 0 {
                    break;
                }
                idx[depth] = 0;
                depth -= 1;
                idx[depth] += 1;
                continue;
            }
            let s = partial[depth] + axes[depth][idx[depth]].1;
            if s < r2 {
                partial[depth + 1] = s;
                depth += 1;
            } else {
                idx[depth] += 1;
            }
        }
    }

    /// Uniform point of the union of free cells, or `None` if all are blocked.
    pub fn sample_point<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Point> {
        let total = self.stamp.len();
        if self.blocked >= total {
            return None;
        }
        let mut cell = None;
        for _ in 0..REJECTION_TRIES {
            let c = rng.random_range(0..total);
            self.cells_touched += 1;
            if !self.is_blocked(c) {
                cell = Some(c);
                break;
            }
        }
        let cell = match cell {
            Some(c) => c,
            None => {
                self.cells_touched += total as u64;
                let free: Vec<usize> = (0..total).filter(|&c| !self.is_blocked(c)).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        let eps = self.eps();
        let mut p = self.cell_origin(cell);
        for x in p.iter_mut() {
            *x = (*x + rng.random::<f64>() * eps).min(1.0);
        }
        Some(p)
    }
}

/// Fixed-radius grid importance sampler.
pub(crate) fn iteration<R: Rng + ?Sized>(space: &SpaceSpec, table: Option<&WeightTable>, rng: &mut R) -> Iteration {
    let table = table.expect("grid sampler carries a weight table");
    let a = space.max_radius();
    let m = table.sample_m(rng);
    let mut cfg = empty_config(space);
    if m < 2 {
        for i in 0..m {
            cfg.insert(Sphere::new(i as u64, super::uniform_point(space.dim, rng), a));
        }
        bernoulli_accept(1.0, rng);
        return Iteration { accepted: Some(cfg), spheres: m as u64, cells_touched: 0 };
    }
    let mut grid = GridState::new(space.dim, space.metric, table.grid_cells[m]);
    let mut log_lr = 0.0;
    for i in 0..m {
        let blocked = grid.blocked_volume();
        let Some(x) = grid.sample_point(rng) else {
            bernoulli_accept(0.0, rng);
            return Iteration { accepted: None, spheres: i as u64, cells_touched: grid.cells_touched() };
        };
        log_lr += (-blocked).ln_1p();
        let s = Sphere::new(i as u64, x, a);
        if cfg.overlaps_any(&s) {
            bernoulli_accept(0.0, rng);
            return Iteration { accepted: None, spheres: i as u64 + 1, cells_touched: grid.cells_touched() };
        }
        if i + 1 < m {
            grid.mark_ball(&s.center, 2.0 * a);
        }
        cfg.insert(s);
    }
    let p = (log_lr - table.log_weights[m]).exp();
    let ok = bernoulli_accept(p, rng);
    Iteration { accepted: ok.then_some(cfg), spheres: m as u64, cells_touched: grid.cells_touched() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist2_unchecked;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: test each cell's corners (the farthest point of a
    /// box from any center is a corner, with torus wrap handled by sampling
    /// the antipodal plane too).
    fn brute_blocked(dim: usize, metric: Metric, g: usize, centers: &[Point], reach: f64) -> Vec<bool> {
        let eps = 1.0 / g as f64;
        let total = g.pow(dim as u32);
        let probe = GridState::new(dim, metric, g);
        (0..total)
            .map(|cell| {
                let o = probe.cell_origin(cell);
                centers.iter().any(|c| {
                    // candidate extreme values per axis: endpoints and antipode if inside
                    let per_axis: Vec<Vec<f64>> = (0..dim)
                        .map(|ax| {
                            let mut v = vec![o[ax], o[ax] + eps];
                            if metric == Metric::Torus {
                                let anti = (c[ax] + 0.5).rem_euclid(1.0);
                                if anti >= o[ax] && anti <= o[ax] + eps {
                                    v.push(anti);
                                }
                            }
                            v
                        })
                        .collect();
                    let mut worst = 0.0f64;
                    let mut stack: Vec<Vec<f64>> = vec![vec![]];
                    for vals in &per_axis {
                        stack = stack
                            .into_iter()
                            .flat_map(|p| vals.iter().map(move |&v| [p.clone(), vec![v]].concat()))
                            .collect();
                    }
                    for p in stack {
                        worst = worst.max(dist2_unchecked(metric, c, &p));
                    }
                    worst < reach * reach
                })
            })
            .collect()
    }

    #[test]
    fn marks_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(dim, metric, g, reach) in &[
            (2, Metric::Torus, 20, 0.17),
            (2, Metric::Euclidean, 20, 0.17),
            (1, Metric::Torus, 50, 0.13),
            (3, Metric::Torus, 9, 0.3),
            (3, Metric::Euclidean, 9, 0.3),
            (2, Metric::Torus, 8, 0.45),
        ] {
            for _ in 0..20 {
                let centers: Vec<Point> =
                    (0..3).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
                let mut grid = GridState::new(dim, metric, g);
                for c in &centers {
                    grid.mark_ball(c, reach);
                }
                let oracle = brute_blocked(dim, metric, g, &centers, reach);
                let marks: Vec<bool> = (0..grid.total_cells()).map(|c| grid.is_blocked(c)).collect();
                assert_eq!(marks, oracle, "dim={dim} metric={metric:?} g={g}");
                assert_eq!(grid.blocked_cells(), oracle.iter().filter(|&&b| b).count());
            }
        }
    }

    #[test]
    fn reset_clears_marks() {
        let mut grid = GridState::new(2, Metric::Torus, 16);
        grid.mark_ball(&[0.5, 0.5], 0.3);
        assert!(grid.blocked_cells() > 0);
        grid.reset();
        assert_eq!(grid.blocked_cells(), 0);
        assert!((0..grid.total_cells()).all(|c| !grid.is_blocked(c)));
    }

    #[test]
    fn sampled_points_are_in_free_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut grid = GridState::new(2, Metric::Euclidean, 32);
        grid.mark_ball(&[0.3, 0.3], 0.4);
        grid.mark_ball(&[0.8, 0.7], 0.4);
        let free = grid.total_cells() - grid.blocked_cells();
        assert!(free > 0);
        let mut hits = vec![0usize; grid.total_cells()];
        let n = 200_000;
        for _ in 0..n {
            let p = grid.sample_point(&mut rng).unwrap();
            let c = grid.cell_of(&p);
            assert!(!grid.is_blocked(c));
            hits[c] += 1;
        }
        // chi-square against uniform over free cells
        let e = n as f64 / free as f64;
        let stat: f64 = (0..grid.total_cells())
            .filter(|&c| !grid.is_blocked(c))
            .map(|c| (hits[c] as f64 - e).powi(2) / e)
            .sum();
        let dof = (free - 1) as f64;
        assert!((stat - dof).abs() < 6.0 * (2.0 * dof).sqrt(), "stat={stat} dof={dof}");
    }

    #[test]
    fn dense_grid_falls_back_to_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut grid = GridState::new(2, Metric::Torus, 64);
        grid.mark_ball(&[0.5, 0.5], 0.7);
        let free = grid.total_cells() - grid.blocked_cells();
        assert!(free > 0 && free < 64);
        for _ in 0..200 {
            let p = grid.sample_point(&mut rng).unwrap();
            assert!(!grid.is_blocked(grid.cell_of(&p)));
        }
    }
}
