use hardsphere::estimators::{
    acceptance_identity, chi_square_homogeneity, count_histogram, draw_samples, work_per_sample,
};
use hardsphere::samplers::stability_counters;
use hardsphere::{Configuration, Metric, RadiusLaw, Sampler, SamplerKind, SamplerOptions, SpaceSpec};

fn opts() -> SamplerOptions {
    SamplerOptions::default()
}

fn counts(s: &SpaceSpec, kind: SamplerKind, t: u64, seed: u64) -> Vec<u64> {
    let sampler = Sampler::new(s, kind, opts()).unwrap();
    count_histogram(&work_per_sample(&sampler, t, seed).unwrap().counts)
}

/// Number of pairs closer than `k` times the contact distance.
fn near_pairs(cfg: &Configuration, k: f64) -> usize {
    let sp = cfg.spheres();
    let mut n = 0;
    for i in 0..sp.len() {
        for j in i + 1..sp.len() {
            let d = hardsphere::geometry::distance(cfg.metric(), &sp[i].center, &sp[j].center).unwrap();
            if d < k * (sp[i].radius + sp[j].radius) {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn random_radius_sampler_matches_naive() {
    let cases = [
        SpaceSpec::new(1, Metric::Torus, 6.0, 0.8, RadiusLaw::TwoPoint { low: 0.2, high: 1.0, p_low: 0.5 }).unwrap(),
        SpaceSpec::new(2, Metric::Torus, 6.0, 0.5, RadiusLaw::UniformRange { lo: 0.2, hi: 0.5 }).unwrap(),
        SpaceSpec::new(1, Metric::Euclidean, 8.0, 0.8, RadiusLaw::UniformRange { lo: 0.3, hi: 1.0 }).unwrap(),
    ];
    for (k, s) in cases.iter().enumerate() {
        let a = counts(s, SamplerKind::Naive, 3_000, 40 + k as u64);
        let b = counts(s, SamplerKind::RandomRadiusIs, 3_000, 80 + k as u64);
        let c = chi_square_homogeneity(&a, &b).unwrap();
        assert!(c.p_value > 1e-3, "case {k}: {c:?}");
    }
}

#[test]
fn random_radius_sampler_with_tuned_rho_matches_naive() {
    let s = SpaceSpec::new(1, Metric::Torus, 8.0, 0.8, RadiusLaw::TwoPoint { low: 0.2, high: 1.0, p_low: 0.5 }).unwrap();
    let tuned = Sampler::new(&s, SamplerKind::RandomRadiusIs, SamplerOptions { optimize_rho: true, ..opts() }).unwrap();
    let b = count_histogram(&work_per_sample(&tuned, 3_000, 5).unwrap().counts);
    let a = counts(&s, SamplerKind::Naive, 3_000, 6);
    let c = chi_square_homogeneity(&a, &b).unwrap();
    assert!(c.p_value > 1e-3, "{c:?}");
}

#[test]
fn torus_and_three_dimensional_samplers_agree() {
    let cases = [
        SpaceSpec::new(2, Metric::Torus, 8.0, 0.5, RadiusLaw::Constant(0.4)).unwrap(),
        SpaceSpec::new(3, Metric::Torus, 6.0, 0.4, RadiusLaw::Constant(0.3)).unwrap(),
    ];
    for (k, s) in cases.iter().enumerate() {
        let base = counts(s, SamplerKind::Naive, 3_000, 1 + k as u64);
        for (j, kind) in [SamplerKind::GridIs, SamplerKind::DcftpWithSwaps, SamplerKind::DcftpWithoutSwaps]
            .iter()
            .enumerate()
        {
            let other = counts(s, *kind, 3_000, 100 + 10 * k as u64 + j as u64);
            let c = chi_square_homogeneity(&base, &other).unwrap();
            assert!(c.p_value > 1e-3, "case {k} {kind}: {c:?}");
        }
    }
}

#[test]
fn near_contact_pairs_agree() {
    // a spatial statistic, not just the count
    let s = SpaceSpec::new(2, Metric::Euclidean, 5.0, 0.5, RadiusLaw::Constant(0.5)).unwrap();
    let hist = |kind: SamplerKind, seed: u64| {
        let sampler = Sampler::new(&s, kind, opts()).unwrap();
        let pairs: Vec<usize> =
            draw_samples(&sampler, 3_000, seed).unwrap().iter().map(|(c, _)| near_pairs(c, 1.5)).collect();
        count_histogram(&pairs)
    };
    let base = hist(SamplerKind::Naive, 1);
    for (j, kind) in [SamplerKind::GridIs, SamplerKind::DcftpLoss, SamplerKind::DcftpWithSwaps].iter().enumerate() {
        let c = chi_square_homogeneity(&base, &hist(*kind, 20 + j as u64)).unwrap();
        assert!(c.p_value > 1e-3, "{kind}: {c:?}");
    }
}

#[test]
fn acceptance_identity_holds_for_exact_line_sampler() {
    let s = SpaceSpec::new(1, Metric::Torus, 6.0, 0.5, RadiusLaw::Constant(0.3)).unwrap();
    let naive = Sampler::new(&s, SamplerKind::Naive, opts()).unwrap();
    let exact = Sampler::new(&s, SamplerKind::Exact1d, opts()).unwrap();
    let id = acceptance_identity(&naive, &exact, 50_000, 4).unwrap();
    assert!(id.z.abs() <= 4.0, "{id:?}");
    // importance sampling should accept more often than naive rejection
    assert!(id.importance.value > id.naive.value);
}

#[test]
fn acceptance_parameters_stay_in_unit_interval() {
    let s = SpaceSpec::new(2, Metric::Torus, 8.0, 0.5, RadiusLaw::Constant(0.4)).unwrap();
    for kind in [SamplerKind::Naive, SamplerKind::GridIs] {
        let sampler = Sampler::new(&s, kind, opts()).unwrap();
        work_per_sample(&sampler, 500, 3).unwrap();
    }
    let rr = SpaceSpec::new(1, Metric::Torus, 6.0, 0.8, RadiusLaw::TwoPoint { low: 0.2, high: 1.0, p_low: 0.5 }).unwrap();
    work_per_sample(&Sampler::new(&rr, SamplerKind::RandomRadiusIs, opts()).unwrap(), 500, 3).unwrap();
    let (checks, violations) = stability_counters();
    assert!(checks > 0);
    assert_eq!(violations, 0);
}

#[test]
fn replicates_do_not_depend_on_thread_count() {
    let s = SpaceSpec::new(2, Metric::Euclidean, 5.0, 0.5, RadiusLaw::Constant(0.5)).unwrap();
    let sampler = Sampler::new(&s, SamplerKind::DcftpWithSwaps, opts()).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| draw_samples(&sampler, 50, 77).unwrap())
    };
    let (a, b) = (run(1), run(3));
    for ((ca, sa), (cb, sb)) in a.iter().zip(&b) {
        assert_eq!(ca.spheres(), cb.spheres());
        assert_eq!(sa, sb);
    }
}
