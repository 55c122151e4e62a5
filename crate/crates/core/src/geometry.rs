//! Spheres, metrics and the bucketed spatial index used by every sampler.
//!
//! A sphere is stored with its radius already scaled by `1 / lambda^eta`.
//! Overlap is strict: two spheres whose centers sit exactly `r1 + r2` apart
//! do not overlap.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use smallvec::SmallVec;

use crate::error::{usage, Error, Result};
use crate::radius::RadiusLaw;

pub type Point = SmallVec<[f64; 4]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    Torus,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => f.write_str("euclidean"),
            Metric::Torus => f.write_str("torus"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "euclid" => Ok(Metric::Euclidean),
            "torus" => Ok(Metric::Torus),
            other => usage(format!("unknown metric '{other}' (expected euclidean|torus)")),
        }
    }
}

/// A model instance: dimension, metric, total intensity, radius exponent and
/// the law of the unscaled radius `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    pub dim: usize,
    pub metric: Metric,
    pub lambda: f64,
    pub eta: f64,
    pub radius_law: RadiusLaw,
}

impl SpaceSpec {
    pub fn new(dim: usize, metric: Metric, lambda: f64, eta: f64, radius_law: RadiusLaw) -> Result<Self> {
        if dim == 0 {
            return usage("dimension must be at least 1");
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return usage(format!("lambda must be positive and finite, got {lambda}"));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return usage(format!("eta must be positive and finite, got {eta}"));
        }
        radius_law.validate()?;
        let spec = SpaceSpec { dim, metric, lambda, eta, radius_law };
        let r_max = spec.radius_law.r_max(dim);
        // on the torus a sphere must not wrap onto itself (equality is fine for
        // an open ball); in the cube it only has to fit
        let need = match metric {
            Metric::Torus => 2.0 * r_max,
            Metric::Euclidean => r_max,
        };
        if spec.scale() < need {
            return usage(format!("lambda^eta = {} must be at least {need} for the {metric} metric", spec.scale()));
        }
        Ok(spec)
    }

    /// `lambda^eta`, the divisor turning `R` into a radius.
    pub fn scale(&self) -> f64 {
        self.lambda.powf(self.eta)
    }

    pub fn max_radius(&self) -> f64 {
        self.radius_law.r_max(self.dim) / self.scale()
    }

    pub fn min_radius(&self) -> f64 {
        self.radius_law.r_min(self.dim) / self.scale()
    }

    pub fn gamma_prime(&self) -> f64 {
        gamma_prime(self.dim, self.metric)
    }

    /// Same model at a different intensity.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        SpaceSpec::new(self.dim, self.metric, lambda, self.eta, self.radius_law.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub id: u64,
    pub center: Point,
    pub radius: f64,
}

impl Sphere {
    pub fn new(id: u64, center: impl Into<Point>, radius: f64) -> Self {
        Sphere { id, center: center.into(), radius }
    }
}

#[inline]
fn wrapped_gap(a: f64, b: f64) -> f64 {
    let g = (a - b).abs();
    g.min(1.0 - g)
}

#[inline]
pub(crate) fn dist2_unchecked(metric: Metric, x: &[f64], y: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
        Metric::Torus => x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let g = wrapped_gap(a.rem_euclid(1.0), b.rem_euclid(1.0));
                g * g
            })
            .sum(),
    }
}

pub fn distance(metric: Metric, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return usage(format!("dimension mismatch: {} vs {}", x.len(), y.len()));
    }
    Ok(dist2_unchecked(metric, x, y).sqrt())
}

#[inline]
pub fn overlaps(a: &Sphere, b: &Sphere, metric: Metric) -> bool {
    let reach = a.radius + b.radius;
    dist2_unchecked(metric, &a.center, &b.center) < reach * reach
}

/// Volume constant of the unit ball, `pi^(d/2) / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(dim - 2) * 2.0 * PI / dim as f64,
    }
}

pub fn sphere_volume(dim: usize, radius: f64) -> f64 {
    unit_ball_volume(dim) * radius.powi(dim as i32)
}

/// Smallest in-space volume fraction of a ball: the full ball on the torus,
/// a `2^-d` corner orthant in the Euclidean cube.
pub fn gamma_prime(dim: usize, metric: Metric) -> f64 {
    match metric {
        Metric::Torus => unit_ball_volume(dim),
        Metric::Euclidean => unit_ball_volume(dim) / 2f64.powi(dim as i32),
    }
}

/// All-pairs acceptability check, no index.
pub fn is_acceptable_brute(spheres: &[Sphere], metric: Metric) -> bool {
    for i in 0..spheres.len() {
        for j in (i + 1)..spheres.len() {
            if overlaps(&spheres[i], &spheres[j], metric) {
                return false;
            }
        }
    }
    true
}

/// A finite configuration of spheres with a uniform bucket index.
///
/// Bucket width is at least the largest possible sum of two radii, so an
/// overlap query only has to inspect the `3^d` buckets around the query center.
#[derive(Debug, Clone)]
pub struct Configuration {
    dim: usize,
    metric: Metric,
    per_side: usize,
    spheres: Vec<Sphere>,
    slots: HashMap<u64, usize>,
    buckets: HashMap<usize, SmallVec<[u64; 4]>>,
}

impl Configuration {
    pub fn new(space: &SpaceSpec) -> Self {
        Self::with_max_radius(space.dim, space.metric, space.max_radius())
    }

    pub fn with_max_radius(dim: usize, metric: Metric, max_radius: f64) -> Self {
        let width = (2.0 * max_radius).max(1.0 / 64.0);
        let per_side = ((1.0 / width).floor() as usize).max(1);
        Configuration {
            dim,
            metric,
            per_side,
            spheres: Vec::new(),
            slots: HashMap::new(),
            buckets: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.spheres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    pub fn spheres(&self) -> &[Sphere] {
        &self.spheres
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sphere> {
        self.spheres.iter()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.slots.contains_key(&id)
    }

    pub fn get(&self, id: u64) -> Option<&Sphere> {
        self.slots.get(&id).map(|&i| &self.spheres[i])
    }

    /// Sorted sphere ids.
    pub fn ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.spheres.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn clear(&mut self) {
        self.spheres.clear();
        self.slots.clear();
        self.buckets.clear();
    }

    fn bucket_coord(&self, x: f64) -> usize {
        let k = (x * self.per_side as f64).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.per_side - 1)
        }
    }

    fn bucket_of(&self, center: &[f64]) -> usize {
        center
            .iter()
            .fold(0, |acc, &x| acc * self.per_side + self.bucket_coord(x))
    }

    fn neighbor_coords(&self, k: usize) -> SmallVec<[usize; 3]> {
        let g = self.per_side;
        if g <= 3 {
            return (0..g).collect();
        }
        match self.metric {
            Metric::Torus => [(k + g - 1) % g, k, (k + 1) % g].into_iter().collect(),
            Metric::Euclidean => {
                let lo = k.saturating_sub(1);
                let hi = (k + 1).min(g - 1);
                (lo..=hi).collect()
            }
        }
    }

    /// Visits every stored sphere in the buckets adjacent to `center`.
    fn for_each_near(&self, center: &[f64], mut f: impl FnMut(&Sphere) -> bool) {
        if self.spheres.is_empty() {
            return;
        }
        let per_dim: SmallVec<[SmallVec<[usize; 3]>; 4]> = center
            .iter()
            .map(|&x| self.neighbor_coords(self.bucket_coord(x)))
            .collect();
        let mut cursor: SmallVec<[usize; 4]> = SmallVec::from_elem(0, self.dim);
        loop {
            let key = cursor
                .iter()
                .enumerate()
                .fold(0, |acc, (axis, &c)| acc * self.per_side + per_dim[axis][c]);
            if let Some(ids) = self.buckets.get(&key) {
                for id in ids {
                    let s = &self.spheres[self.slots[id]];
                    if !f(s) {
                        return;
                    }
                }
            }
            // odometer increment
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                cursor[axis] += 1;
                if cursor[axis] < per_dim[axis].len() {
                    break;
                }
                cursor[axis] = 0;
            }
        }
    }

    fn normalize(&self, mut sphere: Sphere) -> Sphere {
        if self.metric == Metric::Torus {
            for x in sphere.center.iter_mut() {
                let mut y = x.rem_euclid(1.0);
                if y >= 1.0 {
                    y = 0.0;
                }
                *x = y;
            }
        }
        sphere
    }

    /// True iff `probe` overlaps any stored sphere with a different id.
    pub fn overlaps_any(&self, probe: &Sphere) -> bool {
        let mut hit = false;
        self.for_each_near(&probe.center, |s| {
            if s.id != probe.id && overlaps(s, probe, self.metric) {
                hit = true;
                return false;
            }
            true
        });
        hit
    }

    /// Ids of stored spheres overlapping `probe`, sorted.
    pub fn overlapping_ids(&self, probe: &Sphere) -> SmallVec<[u64; 4]> {
        let mut out = SmallVec::new();
        self.for_each_near(&probe.center, |s| {
            if s.id != probe.id && overlaps(s, probe, self.metric) {
                out.push(s.id);
            }
            true
        });
        out.sort_unstable();
        out
    }

    pub fn overlap_count(&self, probe: &Sphere) -> usize {
        let mut n = 0;
        self.for_each_near(&probe.center, |s| {
            if s.id != probe.id && overlaps(s, probe, self.metric) {
                n += 1;
            }
            true
        });
        n
    }

    /// Inserts a sphere. Torus centers are reduced into `[0, 1)`.
    ///
    /// Panics if the id is already present.
    pub fn insert(&mut self, sphere: Sphere) {
        let sphere = self.normalize(sphere);
        debug_assert_eq!(sphere.center.len(), self.dim);
        let key = self.bucket_of(&sphere.center);
        let prev = self.slots.insert(sphere.id, self.spheres.len());
        assert!(prev.is_none(), "duplicate sphere id {}", sphere.id);
        self.buckets.entry(key).or_default().push(sphere.id);
        self.spheres.push(sphere);
    }

    pub fn remove(&mut self, id: u64) -> Option<Sphere> {
        let slot = self.slots.remove(&id)?;
        let sphere = self.spheres.swap_remove(slot);
        if slot < self.spheres.len() {
            let moved = self.spheres[slot].id;
            self.slots.insert(moved, slot);
        }
        let key = self.bucket_of(&sphere.center);
        if let Some(ids) = self.buckets.get_mut(&key) {
            if let Some(p) = ids.iter().position(|&x| x == id) {
                ids.swap_remove(p);
            }
            if ids.is_empty() {
                self.buckets.remove(&key);
            }
        }
        Some(sphere)
    }

    /// No two stored spheres overlap. Uses the bucket index.
    pub fn is_acceptable(&self) -> bool {
        self.spheres.iter().all(|s| {
            let mut ok = true;
            self.for_each_near(&s.center, |t| {
                if t.id > s.id && overlaps(s, t, self.metric) {
                    ok = false;
                    return false;
                }
                true
            });
            ok
        })
    }

    pub fn into_spheres(self) -> Vec<Sphere> {
        self.spheres
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sph(id: u64, c: &[f64], r: f64) -> Sphere {
        Sphere::new(id, Point::from_slice(c), r)
    }

    #[test]
    fn distance_examples() {
        assert_close!(distance(Metric::Euclidean, &[0.05], &[0.95]).unwrap(), 0.90, 1e-12);
        assert_close!(distance(Metric::Torus, &[0.05], &[0.95]).unwrap(), 0.10, 1e-12);
        assert_close!(
            distance(Metric::Torus, &[0.9, 0.9], &[0.1, 0.1]).unwrap(),
            0.08f64.sqrt(),
            1e-12
        );
        assert!(matches!(distance(Metric::Torus, &[0.1], &[0.1, 0.2]), Err(Error::Usage(_))));
    }

    #[test]
    fn overlap_examples() {
        let a = sph(0, &[0.05], 0.06);
        let b = sph(1, &[0.95], 0.06);
        assert!(overlaps(&a, &b, Metric::Torus));
        assert!(!overlaps(&a, &b, Metric::Euclidean));
        assert!(overlaps(&a, &sph(2, &[0.05], 0.06), Metric::Euclidean));
        // touching spheres do not overlap
        let c = sph(3, &[0.25], 0.125);
        let d = sph(4, &[0.5], 0.125);
        assert!(!overlaps(&c, &d, Metric::Euclidean));
    }

    #[test]
    fn acceptability_examples() {
        let mut cfg = Configuration::with_max_radius(2, Metric::Torus, 0.05);
        assert!(cfg.is_acceptable());
        cfg.insert(sph(0, &[0.1, 0.1], 0.05));
        assert!(cfg.is_acceptable());
        cfg.insert(sph(1, &[0.5, 0.5], 0.05));
        assert!(cfg.is_acceptable());
        cfg.insert(sph(2, &[0.12, 0.1], 0.05));
        assert!(!cfg.is_acceptable());
        assert_eq!(cfg.overlapping_ids(&sph(9, &[0.11, 0.1], 0.05)).as_slice(), &[0, 2]);
        cfg.remove(0);
        assert!(cfg.is_acceptable());
        assert_eq!(cfg.ids(), vec![1, 2]);
    }

    #[test]
    fn torus_wrap_is_seen_by_index() {
        let mut cfg = Configuration::with_max_radius(2, Metric::Torus, 0.01);
        cfg.insert(sph(0, &[0.999, 0.5], 0.01));
        assert!(cfg.overlaps_any(&sph(1, &[0.001, 0.5], 0.01)));
        let mut e = Configuration::with_max_radius(2, Metric::Euclidean, 0.01);
        e.insert(sph(0, &[0.999, 0.5], 0.01));
        assert!(!e.overlaps_any(&sph(1, &[0.001, 0.5], 0.01)));
    }

    #[test]
    fn volumes() {
        assert_close!(sphere_volume(1, 1.0), 2.0, 1e-15);
        assert_close!(sphere_volume(2, 1.0), PI, 1e-15);
        assert_close!(sphere_volume(3, 0.5), 4.0 * PI / 3.0 * 0.125, 1e-15);
        assert_close!(gamma_prime(2, Metric::Torus), PI, 1e-15);
        assert_close!(gamma_prime(2, Metric::Euclidean), PI / 4.0, 1e-15);
        assert_close!(gamma_prime(1, Metric::Torus), 2.0, 1e-15);
        // Gamma-function form for a few more dimensions
        for d in 1..8usize {
            let via_gamma = PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0 + 1.0);
            assert_close!(unit_ball_volume(d), via_gamma, 1e-12);
        }
    }

    #[test]
    fn index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let dim = 1 + trial % 3;
            let metric = if trial % 2 == 0 { Metric::Torus } else { Metric::Euclidean };
            let r_max = rng.random_range(0.005..0.2);
            let n = rng.random_range(0..=50);
            let mut cfg = Configuration::with_max_radius(dim, metric, r_max);
            for id in 0..n {
                let c: Point = (0..dim).map(|_| rng.random::<f64>()).collect();
                let r = rng.random_range(0.2 * r_max..=r_max);
                cfg.insert(Sphere::new(id, c, r));
            }
            assert_eq!(cfg.is_acceptable(), is_acceptable_brute(cfg.spheres(), metric), "trial {trial}");
        }
    }

    #[test]
    fn torus_metric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let dim = rng.random_range(1..=3);
            let p = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.random()).collect() };
            let (x, y, z) = (p(&mut rng), p(&mut rng), p(&mut rng));
            let dxy = distance(Metric::Torus, &x, &y).unwrap();
            assert_close!(dxy, distance(Metric::Torus, &y, &x).unwrap(), 1e-15);
            assert!(dxy <= distance(Metric::Torus, &x, &z).unwrap() + distance(Metric::Torus, &z, &y).unwrap() + 1e-12);
            assert!(dxy <= distance(Metric::Euclidean, &x, &y).unwrap() + 1e-15);
        }
    }

    #[test]
    fn acceptability_is_hereditary() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 200 {
            let n = rng.random_range(2..20);
            let spheres: Vec<Sphere> = (0..n)
                .map(|id| sph(id, &[rng.random(), rng.random()], 0.04))
                .collect();
            if !is_acceptable_brute(&spheres, Metric::Torus) {
                continue;
            }
            checked += 1;
            let mut sub = Configuration::with_max_radius(2, Metric::Torus, 0.04);
            for s in spheres.iter().filter(|_| rng.random_bool(0.5)) {
                sub.insert(s.clone());
            }
            assert!(sub.is_acceptable());
        }
    }
}
