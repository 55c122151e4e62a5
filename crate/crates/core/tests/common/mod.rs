#![allow(dead_code)]

use hardsphere::estimators::Estimate;
use hardsphere::geometry::{is_acceptable_brute, SpaceSpec, Sphere};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// All-pairs non-overlap probability with an unrelated generator and no
/// spatial index.
pub fn brute_pno(space: &SpaceSpec, n: Option<u64>, trials: u64, seed: u64) -> Estimate {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let count = match n {
            Some(n) => n,
            None => Poisson::new(space.lambda).unwrap().sample(&mut rng) as u64,
        };
        let spheres: Vec<Sphere> = (0..count)
            .map(|id| {
                let c: Vec<f64> = (0..space.dim).map(|_| rng.random::<f64>()).collect();
                let r = space.radius_law.sample(space.dim, &mut rng) / space.scale();
                Sphere::new(id, c.as_slice(), r)
            })
            .collect();
        if is_acceptable_brute(&spheres, space.metric) {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    Estimate { value: p, std_error: (p * (1.0 - p) / trials as f64).sqrt(), n_samples: trials, seed }
}

/// Chi-square goodness of fit of observed counts against a pmf, pooling
/// adjacent bins from the top until every expected count reaches 5.
/// Returns `(statistic, dof, p_value)`.
pub fn goodness_of_fit(observed: &[u64], pmf: &[f64]) -> (f64, usize, f64) {
    let total: u64 = observed.iter().sum();
    let len = observed.len().max(pmf.len());
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for i in (0..len).rev() {
        o += observed.get(i).copied().unwrap_or(0) as f64;
        e += pmf.get(i).copied().unwrap_or(0.0) * total as f64;
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let p = ChiSquared::new(dof as f64).unwrap().sf(stat);
    (stat, dof, p)
}

/// Law of the number of spheres of radius `a` on the unit circle under the
/// hard-sphere model with intensity `lambda`: `λ^n/n! (1 - 2na)_+^{n-1}`,
/// normalized.
pub fn circle_count_pmf(lambda: f64, a: f64) -> Vec<f64> {
    let mut w = vec![1.0];
    let mut poisson = 1.0;
    for n in 1.. {
        let free = 1.0 - 2.0 * n as f64 * a;
        if free <= 0.0 {
            break;
        }
        poisson *= lambda / n as f64;
        w.push(poisson * free.powi(n as i32 - 1));
    }
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}
