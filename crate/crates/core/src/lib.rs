//! Perfect samplers for hard-sphere Gibbs point processes on the unit cube
//! or torus: acceptance-rejection with importance-sampled proposals, and
//! dominated coupling from the past.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} = {a} differs from {} = {b} by more than {tol}", stringify!($a), stringify!($b));
    }};
}

pub mod cli;
pub mod dcftp;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod geometry;
pub mod radius;
pub mod rng;
pub mod samplers;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{Configuration, Metric, SpaceSpec, Sphere};
pub use radius::RadiusLaw;
pub use samplers::{RunStats, Sampler, SamplerKind, SamplerOptions};
