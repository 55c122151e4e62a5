//! Dominated coupling from the past.
//!
//! The dominating process is a spatial birth-death process with birth rate
//! `λ` and unit death rate per sphere, started in its Poisson stationary
//! state at time 0. It is extended into the past by running a forward
//! copy: a copy birth is a death of the dominating process seen backwards,
//! and a copy death is a birth. Lower and upper bounding processes are then
//! replayed forward over the window and checked for coalescence.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{is_acceptable_brute, Configuration, SpaceSpec, Sphere};
use crate::samplers::{random_sphere, RunStats};

/// How the bounding processes treat a birth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundRule {
    LossSystem,
    WithoutSwaps,
    WithSwaps,
}

/// One step of the forward copy, i.e. one dominating event seen backwards.
#[derive(Debug, Clone)]
pub enum CopyEvent {
    /// A new sphere appears in the copy; in forward time it dies.
    Birth { sphere: Sphere, dt: f64, rate: f64 },
    /// A sphere leaves the copy; in forward time it is born, with a uniform mark.
    Death { sphere: Sphere, mark: f64, dt: f64, rate: f64 },
}

impl CopyEvent {
    /// Waiting time before the event and the total event rate it was drawn at.
    pub fn timing(&self) -> (f64, f64) {
        match self {
            CopyEvent::Birth { dt, rate, .. } | CopyEvent::Death { dt, rate, .. } => (*dt, *rate),
        }
    }
}

/// The dominating process on `[t_{-n}, 0]`, extendable further back.
#[derive(Debug, Clone)]
pub struct EventStream {
    space: SpaceSpec,
    rng: ChaCha8Rng,
    initial: Vec<Sphere>,
    alive: Vec<Sphere>,
    events: Vec<CopyEvent>,
    next_id: u64,
}

impl EventStream {
    /// Draws the time-0 state from the Poisson stationary law.
    pub fn init_dominating<R: Rng + ?Sized>(space: &SpaceSpec, rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let mut rng = ChaCha8Rng::from_seed(seed);
        let n = crate::samplers::poisson_count(space.lambda, &mut rng);
        let initial: Vec<Sphere> = (0..n).map(|i| random_sphere(space, i, &mut rng)).collect();
        EventStream { space: space.clone(), rng, alive: initial.clone(), initial, events: Vec::new(), next_id: n }
    }

    pub fn initial(&self) -> &[Sphere] {
        &self.initial
    }

    pub fn events(&self) -> &[CopyEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Spheres drawn so far: the time-0 state plus every copy birth.
    pub fn spheres_generated(&self) -> u64 {
        self.next_id
    }

    /// Makes at least `n` events available. Existing events are never redrawn.
    pub fn extend_backward(&mut self, n: usize) {
        let lambda = self.space.lambda;
        while self.events.len() < n {
            let rate = lambda + self.alive.len() as f64;
            let dt = -(1.0 - self.rng.random::<f64>()).ln() / rate;
            if self.rng.random::<f64>() * rate < lambda {
                let sphere = random_sphere(&self.space, self.next_id, &mut self.rng);
                self.next_id += 1;
                self.alive.push(sphere.clone());
                self.events.push(CopyEvent::Birth { sphere, dt, rate });
            } else {
                let i = self.rng.random_range(0..self.alive.len());
                let sphere = self.alive.swap_remove(i);
                let mark = self.rng.random::<f64>();
                self.events.push(CopyEvent::Death { sphere, mark, dt, rate });
            }
        }
    }

    /// Dominating state `n` events before time 0.
    pub fn state_at(&self, n: usize) -> Vec<Sphere> {
        assert!(n <= self.events.len(), "window of {n} events not generated yet");
        let mut state: Vec<Sphere> = self.initial.clone();
        let mut gone: HashSet<u64> = HashSet::new();
        for ev in &self.events[..n] {
            match ev {
                CopyEvent::Birth { sphere, .. } => state.push(sphere.clone()),
                CopyEvent::Death { sphere, .. } => {
                    gone.insert(sphere.id);
                }
            }
        }
        state.retain(|s| !gone.contains(&s.id));
        state
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvariantReport {
    pub events_checked: u64,
    pub sandwich_violations: u64,
    pub lower_overlap_violations: u64,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.sandwich_violations == 0 && self.lower_overlap_violations == 0
    }
}

#[derive(Debug, Clone)]
pub struct BoundsOutcome {
    pub lower: Configuration,
    pub upper: Configuration,
    pub coalesced: bool,
    /// Births admitted into the lower process.
    pub lower_births: u64,
    pub invariants: InvariantReport,
}

/// Replays the window of `n` events forward from `L = ∅`, `U = D(t_{-n})`.
pub fn run_bounds(stream: &EventStream, n: usize, rule: BoundRule, check_invariants: bool) -> BoundsOutcome {
    let space = &stream.space;
    let start = stream.state_at(n);
    let mut dominating: HashSet<u64> = start.iter().map(|s| s.id).collect();
    let mut lower = Configuration::new(space);
    let mut upper = Configuration::new(space);
    let mut upper_pairs = 0usize;
    for s in start {
        upper_pairs += upper.overlap_count(&s);
        upper.insert(s);
    }
    let mut report = InvariantReport::default();
    let mut lower_births = 0;

    for ev in stream.events[..n].iter().rev() {
        match ev {
            CopyEvent::Birth { sphere, .. } => {
                dominating.remove(&sphere.id);
                lower.remove(sphere.id);
                if let Some(s) = upper.remove(sphere.id) {
                    if rule == BoundRule::LossSystem {
                        upper_pairs -= upper.overlap_count(&s);
                    }
                }
            }
            CopyEvent::Death { sphere, .. } => {
                dominating.insert(sphere.id);
                let x = sphere;
                match rule {
                    BoundRule::LossSystem => {
                        let upper_hits = upper.overlap_count(x);
                        let to_lower = upper_pairs == 0 && upper_hits == 0;
                        let to_upper = !lower.overlaps_any(x);
                        if to_lower {
                            lower.insert(x.clone());
                            lower_births += 1;
                        }
                        if to_upper {
                            upper_pairs += upper_hits;
                            upper.insert(x.clone());
                        }
                    }
                    BoundRule::WithoutSwaps => {
                        let to_lower = !upper.overlaps_any(x);
                        let to_upper = !lower.overlaps_any(x);
                        if to_lower {
                            lower.insert(x.clone());
                            lower_births += 1;
                        }
                        if to_upper {
                            upper.insert(x.clone());
                        }
                    }
                    BoundRule::WithSwaps => {
                        let in_upper = upper.overlapping_ids(x);
                        if in_upper.len() <= 1 {
                            for &y in &in_upper {
                                upper.remove(y);
                                lower.remove(y);
                            }
                            upper.insert(x.clone());
                            lower.insert(x.clone());
                            lower_births += 1;
                        } else {
                            let in_lower = lower.overlapping_ids(x);
                            if in_lower.len() <= 1 {
                                upper.insert(x.clone());
                                for &y in &in_lower {
                                    lower.remove(y);
                                }
                            }
                        }
                    }
                }
            }
        }
        if check_invariants {
            report.events_checked += 1;
            let sandwich = lower.iter().all(|s| upper.contains(s.id))
                && upper.iter().all(|s| dominating.contains(&s.id));
            if !sandwich {
                report.sandwich_violations += 1;
            }
            if !is_acceptable_brute(lower.spheres(), space.metric) {
                report.lower_overlap_violations += 1;
            }
        }
    }
    let coalesced = lower.ids() == upper.ids();
    BoundsOutcome { lower, upper, coalesced, lower_births, invariants: report }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DcftpOptions {
    /// Cap on the number of doubling rounds.
    pub max_rounds: Option<u64>,
    pub check_invariants: bool,
}

#[derive(Debug, Clone)]
pub struct DcftpOutput {
    pub sample: Configuration,
    pub stats: RunStats,
    /// Window length (in events) at which the bounds coalesced.
    pub window: usize,
    pub stream: EventStream,
    pub invariants: InvariantReport,
}

/// One perfect sample by doubling the window until the bounds coalesce.
pub fn dcftp_sample<R: Rng + ?Sized>(
    space: &SpaceSpec,
    rule: BoundRule,
    opts: &DcftpOptions,
    rng: &mut R,
) -> Result<DcftpOutput> {
    let mut stream = EventStream::init_dominating(space, rng);
    let mut stats = RunStats::default();
    let mut invariants = InvariantReport::default();
    if stream.initial().is_empty() {
        stats.iterations = 1;
        stats.accepted = 1;
        return Ok(DcftpOutput { sample: Configuration::new(space), stats, window: 0, stream, invariants });
    }
    let mut n = 1usize;
    loop {
        if let Some(cap) = opts.max_rounds {
            if stats.iterations >= cap {
                return Err(Error::Timeout(stats.iterations));
            }
        }
        stream.extend_backward(n);
        let out = run_bounds(&stream, n, rule, opts.check_invariants);
        stats.iterations += 1;
        invariants.events_checked += out.invariants.events_checked;
        invariants.sandwich_violations += out.invariants.sandwich_violations;
        invariants.lower_overlap_violations += out.invariants.lower_overlap_violations;
        if out.coalesced {
            stats.accepted = 1;
            stats.spheres_generated = stream.spheres_generated();
            return Ok(DcftpOutput { sample: out.upper, stats, window: n, stream, invariants });
        }
        n *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Metric;
    use crate::radius::RadiusLaw;

    fn space() -> SpaceSpec {
        SpaceSpec::new(2, Metric::Torus, 8.0, 0.5, RadiusLaw::Constant(0.3)).unwrap()
    }

    #[test]
    fn extension_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = EventStream::init_dominating(&space(), &mut rng);
        let mut b = a.clone();
        a.extend_backward(10);
        a.extend_backward(40);
        a.extend_backward(20);
        b.extend_backward(40);
        assert_eq!(a.len(), 40);
        assert_eq!(format!("{:?}", a.events()), format!("{:?}", b.events()));
        assert_eq!(a.state_at(17).len(), b.state_at(17).len());
    }

    #[test]
    fn state_replays_to_time_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = EventStream::init_dominating(&space(), &mut rng);
        s.extend_backward(64);
        let zero: Vec<u64> = s.state_at(0).iter().map(|x| x.id).collect();
        let init: Vec<u64> = s.initial().iter().map(|x| x.id).collect();
        assert_eq!(zero, init);
    }

    #[test]
    fn bounds_respect_invariants() {
        for rule in [BoundRule::LossSystem, BoundRule::WithoutSwaps, BoundRule::WithSwaps] {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            for _ in 0..30 {
                let opts = DcftpOptions { max_rounds: None, check_invariants: true };
                let out = dcftp_sample(&space(), rule, &opts, &mut rng).unwrap();
                assert!(out.invariants.is_clean(), "{rule:?}: {:?}", out.invariants);
                assert!(out.sample.is_acceptable());
            }
        }
    }

    #[test]
    fn round_cap_times_out() {
        let s = SpaceSpec::new(2, Metric::Torus, 200.0, 0.5, RadiusLaw::Constant(0.6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = DcftpOptions { max_rounds: Some(2), check_invariants: false };
        assert!(matches!(dcftp_sample(&s, BoundRule::WithoutSwaps, &opts, &mut rng), Err(Error::Timeout(2))));
    }
}
