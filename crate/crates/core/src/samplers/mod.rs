//! Perfect samplers for the hard-sphere model.
//!
//! The acceptance-rejection samplers share one loop: draw a proposal,
//! compute the Bernoulli acceptance parameter, accept or restart. Every
//! parameter passes through [`bernoulli_accept`], which records any value
//! outside `[0, 1]` in a process-wide counter.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::dcftp::{dcftp_sample, BoundRule, DcftpOptions};
use crate::error::{usage, Error, Result};
use crate::geometry::{Configuration, Metric, Point, SpaceSpec, Sphere};
use crate::radius::solve_tilt;
use crate::weights::{build_weights, default_rho, optimal_rho, EpsRule, WeightOptions, WeightTable, WeightVariant};

pub mod blocked1d;
pub mod grid;
mod exact1d;
mod naive;
mod random_radius;

pub use blocked1d::BlockedRegion1D;
pub use grid::GridState;
pub(crate) use naive::poisson_count;

/// Work counters for one perfect sample, accumulated across restarts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub spheres_generated: u64,
    pub iterations: u64,
    /// Iterations whose proposal was accepted. For the AR samplers every
    /// attempt but the last is a rejection, so this is 1 per delivered sample.
    pub accepted: u64,
    pub cells_touched: u64,
}

impl RunStats {
    pub fn merge(&mut self, other: &RunStats) {
        self.spheres_generated += other.spheres_generated;
        self.iterations += other.iterations;
        self.accepted += other.accepted;
        self.cells_touched += other.cells_touched;
    }
}

static BERNOULLI_CHECKS: AtomicU64 = AtomicU64::new(0);
static BERNOULLI_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

const PARAM_SLACK: f64 = 1e-9;

/// Number of acceptance parameters evaluated and how many fell outside `[0, 1]`.
pub fn stability_counters() -> (u64, u64) {
    (BERNOULLI_CHECKS.load(Ordering::Relaxed), BERNOULLI_VIOLATIONS.load(Ordering::Relaxed))
}

/// Accepts with probability `p`, recording `p ∉ [0, 1]` as a violation.
pub(crate) fn bernoulli_accept<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    BERNOULLI_CHECKS.fetch_add(1, Ordering::Relaxed);
    if !(p >= -PARAM_SLACK && p <= 1.0 + PARAM_SLACK) {
        BERNOULLI_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
    if p >= 1.0 {
        return true;
    }
    if p <= 0.0 {
        return false;
    }
    rng.random::<f64>() < p
}

pub(crate) fn uniform_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Point {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

pub(crate) fn random_sphere<R: Rng + ?Sized>(space: &SpaceSpec, id: u64, rng: &mut R) -> Sphere {
    let center = uniform_point(space.dim, rng);
    let radius = space.radius_law.sample(space.dim, rng) / space.scale();
    Sphere::new(id, center, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Naive,
    Exact1d,
    GridIs,
    RandomRadiusIs,
    DcftpLoss,
    DcftpWithoutSwaps,
    DcftpWithSwaps,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 7] = [
        SamplerKind::Naive,
        SamplerKind::Exact1d,
        SamplerKind::GridIs,
        SamplerKind::RandomRadiusIs,
        SamplerKind::DcftpLoss,
        SamplerKind::DcftpWithoutSwaps,
        SamplerKind::DcftpWithSwaps,
    ];

    pub fn is_dcftp(self) -> bool {
        matches!(self, SamplerKind::DcftpLoss | SamplerKind::DcftpWithoutSwaps | SamplerKind::DcftpWithSwaps)
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Naive => "naive",
            SamplerKind::Exact1d => "is-1d",
            SamplerKind::GridIs => "grid-is",
            SamplerKind::RandomRadiusIs => "rr-is",
            SamplerKind::DcftpLoss => "dcftp-loss",
            SamplerKind::DcftpWithoutSwaps => "dcftp-wos",
            SamplerKind::DcftpWithSwaps => "dcftp-ws",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SamplerKind::ALL.iter().map(|k| k.name()).collect();
                Error::Usage(format!("unknown sampler '{s}' (expected one of {})", names.join("|")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    /// Cap on AR iterations or DCFTP doubling rounds; `None` runs to completion.
    pub max_iterations: Option<u64>,
    pub delta: f64,
    /// Target mean of `R^d` for the random-radius tilt; `None` picks the default.
    pub rho: Option<f64>,
    /// Replace `rho` by a 64-point grid search.
    pub optimize_rho: bool,
    pub eps_rule: EpsRule,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions { max_iterations: None, delta: 0.5, rho: None, optimize_rho: false, eps_rule: EpsRule::Optimal }
    }
}

/// Outcome of one proposal-and-test round of an AR sampler.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub accepted: Option<Configuration>,
    pub spheres: u64,
    pub cells_touched: u64,
}

/// A sampler with its weight table prepared for one model instance.
#[derive(Debug, Clone)]
pub struct Sampler {
    space: SpaceSpec,
    kind: SamplerKind,
    table: Option<WeightTable>,
    opts: SamplerOptions,
}

impl Sampler {
    pub fn new(space: &SpaceSpec, kind: SamplerKind, opts: SamplerOptions) -> Result<Self> {
        let table = match kind {
            SamplerKind::Naive => None,
            SamplerKind::Exact1d => {
                if space.dim != 1 {
                    return usage("the exact 1-d sampler needs d = 1");
                }
                Some(build_weights(space, WeightVariant::FixedRadiusIS, &weight_opts(&opts, None))?)
            }
            SamplerKind::GridIs => Some(build_weights(space, WeightVariant::GridIS, &weight_opts(&opts, None))?),
            SamplerKind::RandomRadiusIs => {
                let tilt = if opts.optimize_rho {
                    optimal_rho(space, opts.delta)?
                } else {
                    let rho = opts.rho.unwrap_or_else(|| default_rho(space));
                    solve_tilt(&space.radius_law, space.dim, rho)?
                };
                Some(build_weights(space, WeightVariant::RandomRadiusIS, &weight_opts(&opts, Some(tilt)))?)
            }
            _ => None,
        };
        Ok(Sampler { space: space.clone(), kind, table, opts })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn table(&self) -> Option<&WeightTable> {
        self.table.as_ref()
    }

    /// `E[σ(N)]` of the proposal weights (1 for the naive sampler).
    pub fn expected_sigma(&self) -> f64 {
        self.table.as_ref().map_or(1.0, |t| t.expected_sigma)
    }

    /// One AR round. Errors for DCFTP samplers, which have no such round.
    pub fn iterate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Iteration> {
        match self.kind {
            SamplerKind::Naive => Ok(naive::iteration(&self.space, rng)),
            SamplerKind::Exact1d => Ok(exact1d::iteration(&self.space, self.table(), rng)),
            SamplerKind::GridIs => Ok(grid::iteration(&self.space, self.table(), rng)),
            SamplerKind::RandomRadiusIs => Ok(random_radius::iteration(&self.space, self.table(), rng)),
            _ => usage(format!("{} has no acceptance-rejection round", self.kind)),
        }
    }

    /// One perfect sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Configuration, RunStats)> {
        let (cfg, stats) = if self.kind.is_dcftp() {
            let rule = match self.kind {
                SamplerKind::DcftpLoss => BoundRule::LossSystem,
                SamplerKind::DcftpWithoutSwaps => BoundRule::WithoutSwaps,
                _ => BoundRule::WithSwaps,
            };
            let opts = DcftpOptions { max_rounds: self.opts.max_iterations, check_invariants: false };
            let out = dcftp_sample(&self.space, rule, &opts, rng)?;
            (out.sample, out.stats)
        } else {
            let mut stats = RunStats::default();
            loop {
                if let Some(cap) = self.opts.max_iterations {
                    if stats.iterations >= cap {
                        return Err(Error::Timeout(stats.iterations));
                    }
                }
                let it = self.iterate(rng)?;
                stats.iterations += 1;
                stats.spheres_generated += it.spheres;
                stats.cells_touched += it.cells_touched;
                if let Some(cfg) = it.accepted {
                    stats.accepted += 1;
                    break (cfg, stats);
                }
            }
        };
        assert!(cfg.is_acceptable(), "{} returned an overlapping configuration", self.kind);
        Ok((cfg, stats))
    }
}

fn weight_opts(opts: &SamplerOptions, tilt: Option<crate::radius::TiltSpec>) -> WeightOptions {
    WeightOptions { tilt, delta: opts.delta, eps_rule: opts.eps_rule }
}

pub(crate) fn empty_config(space: &SpaceSpec) -> Configuration {
    Configuration::new(space)
}

/// Torus wrapped or Euclidean per-coordinate gap.
#[inline]
pub(crate) fn axis_gap(metric: Metric, a: f64, b: f64) -> f64 {
    let g = (a - b).abs();
    match metric {
        Metric::Euclidean => g,
        Metric::Torus => g.min(1.0 - g),
    }
}
