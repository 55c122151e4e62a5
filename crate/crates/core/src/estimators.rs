//! Monte Carlo estimators built on the samplers.
//!
//! Every replicate `i` draws from [`stream_rng`]`(seed, i)`, and results are
//! merged in index order, so output does not depend on the thread count.

use std::time::Instant;

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{usage, Error, Result};
use crate::geometry::{Configuration, SpaceSpec};
use crate::rng::stream_rng;
use crate::samplers::{poisson_count, random_sphere, RunStats, Sampler};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl Estimate {
    fn from_bernoulli(hits: u64, n: u64, seed: u64) -> Self {
        let p = hits as f64 / n as f64;
        Estimate { value: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), n_samples: n, seed }
    }

    fn from_values(values: &[f64], seed: u64) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate { value: mean, std_error: (var / n).sqrt(), n_samples: values.len() as u64, seed }
    }

    /// Whether `x` lies within `k` standard errors.
    pub fn covers(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.std_error
    }
}

/// Probability that `n` (or a Poisson(λ) number of) independent spheres do
/// not overlap.
pub fn estimate_pno(space: &SpaceSpec, n: Option<u64>, trials: u64, seed: u64) -> Result<Estimate> {
    if trials == 0 {
        return usage("need at least one trial");
    }
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let count = n.unwrap_or_else(|| poisson_count(space.lambda, &mut rng));
            let mut cfg = Configuration::new(space);
            for id in 0..count {
                let s = random_sphere(space, id, &mut rng);
                if cfg.overlaps_any(&s) {
                    return 0;
                }
                cfg.insert(s);
            }
            1
        })
        .sum();
    Ok(Estimate::from_bernoulli(hits, trials, seed))
}

/// `t` independent perfect samples, in replicate order.
pub fn draw_samples(sampler: &Sampler, t: u64, seed: u64) -> Result<Vec<(Configuration, RunStats)>> {
    (0..t)
        .into_par_iter()
        .map(|i| sampler.sample(&mut stream_rng(seed, i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkSummary {
    /// Mean spheres generated per delivered sample.
    pub spheres: Estimate,
    /// Delivered samples over total iterations (doubling rounds for DCFTP).
    pub acc_prob: f64,
    pub totals: RunStats,
    pub wall_ms: f64,
    /// Sphere count of each delivered sample.
    pub counts: Vec<usize>,
}

pub fn work_per_sample(sampler: &Sampler, t: u64, seed: u64) -> Result<WorkSummary> {
    if t == 0 {
        return usage("need at least one replicate");
    }
    let start = Instant::now();
    let runs = draw_samples(sampler, t, seed)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut totals = RunStats::default();
    for (_, s) in &runs {
        totals.merge(s);
    }
    let spheres: Vec<f64> = runs.iter().map(|(_, s)| s.spheres_generated as f64).collect();
    Ok(WorkSummary {
        spheres: Estimate::from_values(&spheres, seed),
        acc_prob: t as f64 / totals.iterations as f64,
        totals,
        wall_ms,
        counts: runs.iter().map(|(c, _)| c.len()).collect(),
    })
}

/// Probability that a fresh sphere, uniform and independent of a perfect
/// sample, overlaps none of it.
pub fn insertion_probability(sampler: &Sampler, t: u64, seed: u64) -> Result<Estimate> {
    if t == 0 {
        return usage("need at least one replicate");
    }
    let hits: Vec<u64> = (0..t)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let (cfg, _) = sampler.sample(&mut rng)?;
            let probe = random_sphere(sampler.space(), u64::MAX, &mut rng);
            Ok(u64::from(!cfg.overlaps_any(&probe)))
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_bernoulli(hits.iter().sum(), t, seed))
}

/// Histogram of sample sizes.
pub fn count_histogram(counts: &[usize]) -> Vec<u64> {
    let mut h = vec![0u64; counts.iter().max().map_or(0, |m| m + 1)];
    for &c in counts {
        h[c] += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square homogeneity test on count histograms. Bins are
/// pooled from the upper tail until both expected counts reach 5; what is
/// left at the low end joins the lowest pooled bin.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquare> {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InsufficientData("empty histogram".into()));
    }
    let len = a.len().max(b.len());
    let at = |h: &[u64], i: usize| h.get(i).copied().unwrap_or(0) as f64;
    let (fa, fb) = (na / (na + nb), nb / (na + nb));

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for i in (0..len).rev() {
        ca += at(a, i);
        cb += at(b, i);
        let pooled = ca + cb;
        if pooled * fa.min(fb) >= 5.0 {
            bins.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => bins.push((ca, cb)),
        }
    }
    if bins.len() < 2 {
        return Err(Error::InsufficientData(format!("{} bin(s) after pooling", bins.len())));
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(oa, ob)| {
            let pooled = oa + ob;
            let (ea, eb) = (pooled * fa, pooled * fb);
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(ChiSquare { statistic, dof, p_value: dist.sf(statistic) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// Per-iteration acceptance rate of the naive sampler.
    pub naive: Estimate,
    /// Per-iteration acceptance rate of the importance sampler.
    pub importance: Estimate,
    pub expected_sigma: f64,
    /// Standardized difference between `importance · E[σ]` and `naive`.
    pub z: f64,
}

/// Compares `P(accept)` of the naive sampler with `E[σ(M)] · P(accept)` of
/// an importance sampler; both estimate the same no-overlap probability.
pub fn acceptance_identity(naive: &Sampler, importance: &Sampler, iterations: u64, seed: u64) -> Result<IdentityCheck> {
    let rate = |s: &Sampler, salt: u64| -> Result<Estimate> {
        let hits: Vec<u64> = (0..iterations)
            .into_par_iter()
            .map(|i| Ok(u64::from(s.iterate(&mut stream_rng(seed ^ salt, i))?.accepted.is_some())))
            .collect::<Result<_>>()?;
        Ok(Estimate::from_bernoulli(hits.iter().sum(), iterations, seed))
    };
    let naive_rate = rate(naive, 0)?;
    let is_rate = rate(importance, 0x9e37_79b9_7f4a_7c15)?;
    let es = importance.expected_sigma();
    let se = ((es * is_rate.std_error).powi(2) + naive_rate.std_error.powi(2)).sqrt();
    let z = if se > 0.0 { (is_rate.value * es - naive_rate.value) / se } else { 0.0 };
    Ok(IdentityCheck { naive: naive_rate, importance: is_rate, expected_sigma: es, z })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_histograms_have_unit_p_value() {
        let h = [10, 40, 80, 50, 20, 3, 1];
        let c = chi_square_homogeneity(&h, &h).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert_close!(c.p_value, 1.0, 1e-12);
    }

    #[test]
    fn tail_bins_are_pooled() {
        // the last three bins hold too little mass and merge into one
        let a = [50, 50, 6, 2, 1];
        let b = [50, 50, 5, 2, 2];
        let c = chi_square_homogeneity(&a, &b).unwrap();
        assert_eq!(c.dof, 2);
    }

    #[test]
    fn single_bin_is_insufficient() {
        assert!(matches!(chi_square_homogeneity(&[0, 3], &[0, 4]), Err(Error::InsufficientData(_))));
        assert!(matches!(chi_square_homogeneity(&[], &[1]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn statistic_matches_hand_computation() {
        // 2x2 table [[30, 10], [20, 20]]: expected [[25, 15], [25, 15]]
        let c = chi_square_homogeneity(&[30, 20], &[10, 20]).unwrap();
        let hand = 25.0 / 25.0 + 25.0 / 15.0 + 25.0 / 25.0 + 25.0 / 15.0;
        assert_close!(c.statistic, hand, 1e-12);
        assert_eq!(c.dof, 1);
        // survival function of chi-square(1) at 16/3, via erfc
        let oracle = statrs::function::erf::erfc((hand / 2.0).sqrt());
        assert_close!(c.p_value, oracle, 1e-12);
    }

    #[test]
    fn histogram_counts() {
        assert_eq!(count_histogram(&[0, 2, 2, 1, 2]), vec![1, 1, 3]);
        assert!(count_histogram(&[]).is_empty());
    }
}
