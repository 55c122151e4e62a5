//! Union of blocked intervals on `[0, 1]` or the unit circle.

use rand::Rng;

use crate::geometry::Metric;

#[derive(Debug, Clone)]
pub struct BlockedRegion1D {
    metric: Metric,
    /// Sorted, disjoint open pieces inside `[0, 1]`.
    intervals: Vec<(f64, f64)>,
}

impl BlockedRegion1D {
    pub fn new(metric: Metric) -> Self {
        BlockedRegion1D { metric, intervals: Vec::new() }
    }

    pub fn clear(&mut self) {
        self.intervals.clear();
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Blocks the open interval `(center - half_width, center + half_width)`,
    /// wrapped on the torus and clipped otherwise.
    pub fn insert(&mut self, center: f64, half_width: f64) {
        if half_width <= 0.0 {
            return;
        }
        let (lo, hi) = (center - half_width, center + half_width);
        match self.metric {
            Metric::Euclidean => self.add_piece(lo.max(0.0), hi.min(1.0)),
            Metric::Torus => {
                if hi - lo >= 1.0 {
                    self.add_piece(0.0, 1.0);
                } else if lo < 0.0 {
                    self.add_piece(0.0, hi);
                    self.add_piece(lo + 1.0, 1.0);
                } else if hi > 1.0 {
                    self.add_piece(lo, 1.0);
                    self.add_piece(0.0, hi - 1.0);
                } else {
                    self.add_piece(lo, hi);
                }
            }
        }
    }

    fn add_piece(&mut self, lo: f64, hi: f64) {
        if hi <= lo {
            return;
        }
        let start = self.intervals.partition_point(|&(_, b)| b < lo);
        let mut end = start;
        let (mut new_lo, mut new_hi) = (lo, hi);
        while end < self.intervals.len() && self.intervals[end].0 <= hi {
            new_lo = new_lo.min(self.intervals[end].0);
            new_hi = new_hi.max(self.intervals[end].1);
            end += 1;
        }
        self.intervals.splice(start..end, std::iter::once((new_lo, new_hi)));
    }

    /// Lebesgue measure of the blocked set.
    pub fn blocked_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum::<f64>().min(1.0)
    }

    pub fn is_blocked(&self, x: f64) -> bool {
        let i = self.intervals.partition_point(|&(_, b)| b <= x);
        i < self.intervals.len() && self.intervals[i].0 < x
    }

    /// Uniform point of the complement, or `None` if it has measure zero.
    pub fn sample_complement<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let free = 1.0 - self.blocked_length();
        if free <= 0.0 {
            return None;
        }
        let mut u = rng.random::<f64>() * free;
        let mut cursor = 0.0;
        let mut last_gap = None;
        for &(a, b) in self.intervals.iter().chain(std::iter::once(&(1.0, 1.0))) {
            let gap = a - cursor;
            if gap > 0.0 {
                if u < gap {
                    return Some(cursor + u);
                }
                u -= gap;
                last_gap = Some((cursor, a));
            }
            cursor = b;
        }
        // rounding left `u` a hair past the last gap
        last_gap.map(|(a, b)| 0.5 * (a + b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn torus_wraps_across_zero() {
        let mut r = BlockedRegion1D::new(Metric::Torus);
        r.insert(0.05, 0.1);
        assert_eq!(r.intervals().len(), 2);
        assert_close!(r.blocked_length(), 0.2, 1e-15);
        assert!(r.is_blocked(0.97));
        assert!(r.is_blocked(0.1));
        assert!(!r.is_blocked(0.5));
    }

    #[test]
    fn euclidean_clips() {
        let mut r = BlockedRegion1D::new(Metric::Euclidean);
        r.insert(0.05, 0.1);
        assert_close!(r.blocked_length(), 0.15, 1e-15);
    }

    #[test]
    fn merges_overlaps() {
        let mut r = BlockedRegion1D::new(Metric::Euclidean);
        r.insert(0.3, 0.1);
        r.insert(0.7, 0.1);
        r.insert(0.5, 0.15);
        assert_eq!(r.intervals().len(), 1);
        assert_close!(r.intervals()[0].0, 0.2, 1e-15);
        assert_close!(r.intervals()[0].1, 0.8, 1e-15);
    }

    #[test]
    fn complement_samples_avoid_blocks_and_are_uniform() {
        let mut r = BlockedRegion1D::new(Metric::Torus);
        r.insert(0.0, 0.1);
        r.insert(0.5, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut left = 0usize;
        let n = 100_000;
        for _ in 0..n {
            let x = r.sample_complement(&mut rng).unwrap();
            assert!(!r.is_blocked(x), "{x}");
            if x < 0.5 {
                left += 1;
            }
        }
        // both free gaps have length 0.2
        let frac = left as f64 / n as f64;
        assert!((frac - 0.5).abs() < 5.0 * (0.25 / n as f64).sqrt(), "{frac}");
    }

    #[test]
    fn fully_blocked_gives_none() {
        let mut r = BlockedRegion1D::new(Metric::Torus);
        r.insert(0.5, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(r.sample_complement(&mut rng).is_none());
    }
}
