//! Weight sequences `σ(n)` and the induced proposal law of the sphere count.
//!
//! All variants share one table layout: log-weights with `-inf` as an exact
//! zero, the pmf `P(M = n) ∝ λ^n σ(n) / n!`, its CDF, and `E[σ(N)]` for
//! `N ~ Poi(λ)`.

use rand::Rng;

use crate::error::{usage, Error, Result};
use crate::geometry::SpaceSpec;
use crate::radius::{solve_tilt, TiltSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightVariant {
    NaiveUnit,
    FixedRadiusIS,
    GridIS,
    RandomRadiusIS,
}

/// How the grid cell edge is chosen for `n` spheres.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsRule {
    /// `1 / floor(max(4 λ^η / r, 4 n² r / λ^η))`, halved until the cell is
    /// small enough that every sphere covers at least one cell.
    Optimal,
    /// A fixed number of cells per side for every `n`.
    CellsPerSide(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightOptions {
    pub tilt: Option<TiltSpec>,
    pub delta: f64,
    pub eps_rule: EpsRule,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions { tilt: None, delta: 0.5, eps_rule: EpsRule::Optimal }
    }
}

const TAIL_REL: f64 = 1e-14;
const MAX_SUPPORT: usize = 50_000_000;

#[derive(Debug, Clone)]
pub struct WeightTable {
    pub variant: WeightVariant,
    pub lambda: f64,
    /// `log σ(n)` for `n = 0..=n_max`.
    pub log_weights: Vec<f64>,
    /// `log C(λ)` with `C(λ) = Σ λ^n σ(n) / n!` over the stored support.
    pub log_normalizer: f64,
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub n_max: usize,
    pub expected_sigma: f64,
    /// Cells per side of the grid used for `n` spheres (0 when no grid).
    pub grid_cells: Vec<usize>,
    /// `(σ_{n,1}, σ_{n,2})`, random-radius tables only.
    pub components: Vec<(f64, f64)>,
    pub delta: f64,
    pub tilt: Option<TiltSpec>,
}

impl WeightTable {
    pub fn weight(&self, n: usize) -> f64 {
        self.log_weights.get(n).map_or(0.0, |w| w.exp())
    }

    pub fn eps(&self, n: usize) -> Option<f64> {
        match self.grid_cells.get(n) {
            Some(&g) if g > 0 => Some(1.0 / g as f64),
            _ => None,
        }
    }

    /// Inverse-CDF draw of `M`.
    pub fn sample_m<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.n_max)
    }

    /// Draw of the partition component `J ∈ {1, 2}` for `m` spheres.
    pub fn sample_component<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> usize {
        if self.variant != WeightVariant::RandomRadiusIS {
            return 1;
        }
        let (s1, s2) = self.components.get(m).copied().unwrap_or((1.0, 0.0));
        if s2 == 0.0 {
            return 1;
        }
        if s1 == 0.0 {
            return 2;
        }
        if rng.random::<f64>() < s1 / (s1 + s2) {
            1
        } else {
            2
        }
    }
}

/// Cells per side for `n` spheres of (minimum) unscaled radius `r`.
pub fn optimal_cells_per_side(dim: usize, lambda: f64, eta: f64, r: f64, n: usize) -> usize {
    let scale = lambda.powf(eta);
    let n = n.max(2) as f64;
    let raw = (4.0 * scale / r).max(4.0 * n * n * r / scale).floor();
    let mut g = (raw as usize).max(1);
    let limit = r / (2.0 * (dim as f64).sqrt() * scale);
    while 1.0 / g as f64 >= limit {
        g *= 2;
    }
    g
}

/// Cell edge length `ε_{λ,n}` for the grid sampler.
pub fn optimal_eps(space: &SpaceSpec, n: usize) -> f64 {
    let r = space.radius_law.r_min(space.dim);
    1.0 / optimal_cells_per_side(space.dim, space.lambda, space.eta, r, n) as f64
}

/// `1 + λ^{ηd} / (γ' r^d)`: no acceptable configuration of fixed radius `r`
/// holds this many spheres.
pub fn packing_bound(space: &SpaceSpec) -> f64 {
    let r = space.radius_law.r_max(space.dim);
    1.0 + space.lambda.powf(space.eta * space.dim as f64) / (space.gamma_prime() * r.powi(space.dim as i32))
}

fn ln_factorials(upto: usize) -> impl FnMut(usize) -> f64 {
    let mut cache = Vec::with_capacity(upto + 1);
    cache.push(0.0);
    move |n: usize| {
        while cache.len() <= n {
            let k = cache.len();
            let prev = cache[k - 1];
            cache.push(prev + (k as f64).ln());
        }
        cache[n]
    }
}

fn log_one_minus(x: f64) -> f64 {
    if x >= 1.0 {
        f64::NEG_INFINITY
    } else {
        (-x).ln_1p()
    }
}

/// `log Π_{i=1..n} (1 - (i-1) c)^+`.
fn log_linear_product(n: usize, c: f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..n {
        acc += log_one_minus(i as f64 * c);
        if acc == f64::NEG_INFINITY {
            break;
        }
    }
    acc
}

/// Shrink of `Σ R_j^d` seen through a grid of edge `eps` when every radius is
/// at least `r_min_scaled`.
fn grid_volume_shrink(dim: usize, eps: f64, r_min_scaled: f64) -> f64 {
    let f = 1.0 - (dim as f64).sqrt() * eps / r_min_scaled;
    if f <= 0.0 {
        0.0
    } else {
        f.powi(dim as i32)
    }
}

/// `(σ_{n,1}, σ_{n,2})` for the random-radius scheme.
fn random_radius_components(space: &SpaceSpec, tilt: &TiltSpec, delta: f64, n: usize, shrink: f64) -> (f64, f64) {
    if (n as f64) <= 1.0 / delta {
        return (1.0, 0.0);
    }
    let k = (n as f64 * delta).floor();
    let lam_d = space.lambda.powf(space.eta * space.dim as f64);
    let x = space.gamma_prime() * shrink * k * tilt.rho / lam_d;
    let base = (1.0 - x).max(0.0);
    let s1 = base.powf(n as f64 * (1.0 - delta));
    let s2 = (-k * tilt.rate_at_rho).exp();
    (s1, s2)
}

fn random_radius_grid_cells(space: &SpaceSpec, n: usize) -> usize {
    if space.dim == 1 || n < 2 {
        return 0;
    }
    let r_min = space.radius_law.r_min(space.dim);
    optimal_cells_per_side(space.dim, space.lambda, space.eta, r_min, n)
}

/// Builds the weight table for one sampler variant.
pub fn build_weights(space: &SpaceSpec, variant: WeightVariant, opts: &WeightOptions) -> Result<WeightTable> {
    let dim = space.dim;
    let gp = space.gamma_prime();
    match variant {
        WeightVariant::FixedRadiusIS | WeightVariant::GridIS if !space.radius_law.is_constant() => {
            return usage(format!("{variant:?} weights need a constant radius law"));
        }
        WeightVariant::RandomRadiusIS => {
            if opts.tilt.is_none() {
                return usage("random-radius weights need a solved tilt");
            }
            if !(opts.delta > 0.0 && opts.delta < 1.0) {
                return usage(format!("delta must lie in (0, 1), got {}", opts.delta));
            }
        }
        _ => {}
    }
    let a = space.max_radius();
    let fixed_c = gp * a.powi(dim as i32);
    let grid_limit = a / (2.0 * (dim as f64).sqrt());
    let r_unscaled = space.radius_law.r_min(dim);

    let mut ln_fact = ln_factorials(1024);
    let ln_lambda = space.lambda.ln();
    let sigma_cap: f64 = if variant == WeightVariant::RandomRadiusIS { 2.0 } else { 1.0 };

    let mut log_weights = Vec::new();
    let mut log_terms = Vec::new();
    let mut grid_cells = Vec::new();
    let mut components = Vec::new();
    let mut log_sum = f64::NEG_INFINITY;

    for n in 0.. {
        if n > MAX_SUPPORT {
            return Err(Error::Internal(format!("weight support exceeds {MAX_SUPPORT}")));
        }
        let nf = n as f64;
        let log_poisson = nf * ln_lambda - ln_fact(n);

        // Poisson tail envelope once past the mode
        if nf + 1.0 > space.lambda && n > 0 {
            let tail = log_poisson + sigma_cap.ln() + ((nf + 1.0) / (nf + 1.0 - space.lambda)).ln();
            if tail < TAIL_REL.ln() + log_sum {
                break;
            }
        }

        let (lw, cells) = match variant {
            WeightVariant::NaiveUnit => (0.0, 0),
            WeightVariant::FixedRadiusIS => (log_linear_product(n, fixed_c), 0),
            WeightVariant::GridIS => {
                if n < 2 {
                    (0.0, 0)
                } else if (n - 1) as f64 * fixed_c >= 1.0 {
                    (f64::NEG_INFINITY, 0)
                } else {
                    let g = match opts.eps_rule {
                        EpsRule::Optimal => optimal_cells_per_side(dim, space.lambda, space.eta, r_unscaled, n),
                        EpsRule::CellsPerSide(g) => {
                            if g == 0 || 1.0 / g as f64 >= grid_limit {
                                return usage(format!(
                                    "grid of {g} cells per side is too coarse: need eps < {grid_limit}"
                                ));
                            }
                            g
                        }
                    };
                    let eps = 1.0 / g as f64;
                    let shrunk = (a - (dim as f64).sqrt() * eps).max(0.0);
                    (log_linear_product(n, gp * shrunk.powi(dim as i32)), g)
                }
            }
            WeightVariant::RandomRadiusIS => {
                let tilt = opts.tilt.as_ref().expect("checked above");
                let g = random_radius_grid_cells(space, n);
                let shrink = if g == 0 { 1.0 } else { grid_volume_shrink(dim, 1.0 / g as f64, space.min_radius()) };
                let (s1, s2) = random_radius_components(space, tilt, opts.delta, n, shrink);
                components.push((s1, s2));
                ((s1 + s2).ln(), g)
            }
        };

        if lw == f64::NEG_INFINITY && matches!(variant, WeightVariant::FixedRadiusIS | WeightVariant::GridIS) {
            // weights are nonincreasing, so this is the exact end of the support
            break;
        }
        let lt = log_poisson + lw;
        log_sum = log_add(log_sum, lt);
        log_weights.push(lw);
        log_terms.push(lt);
        grid_cells.push(cells);
    }

    let n_max = log_weights.len() - 1;
    let pmf: Vec<f64> = log_terms.iter().map(|&t| (t - log_sum).exp()).collect();
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for &p in &pmf {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    for c in cdf.iter_mut() {
        *c /= total;
    }
    *cdf.last_mut().expect("support is never empty") = 1.0;
    let expected_sigma = if variant == WeightVariant::NaiveUnit { 1.0 } else { (log_sum - space.lambda).exp() };

    Ok(WeightTable {
        variant,
        lambda: space.lambda,
        log_weights,
        log_normalizer: log_sum,
        pmf,
        cdf,
        n_max,
        expected_sigma,
        grid_cells,
        components,
        delta: opts.delta,
        tilt: opts.tilt,
    })
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Grid search over 64 interior target means for the one minimizing
/// `σ_{n,1} + σ_{n,2}` at `n = ceil(λ)`.
pub fn optimal_rho(space: &SpaceSpec, delta: f64) -> Result<TiltSpec> {
    let dim = space.dim;
    let floor = space.radius_law.r_min(dim).powi(dim as i32);
    let alpha = space.radius_law.mean_pow(dim);
    let n = space.lambda.ceil().max(2.0) as usize;
    let g = random_radius_grid_cells(space, n);
    let shrink = if g == 0 { 1.0 } else { grid_volume_shrink(dim, 1.0 / g as f64, space.min_radius()) };
    let mut best: Option<(f64, TiltSpec)> = None;
    for k in 0..64 {
        let rho = floor + (alpha - floor) * (k as f64 + 0.5) / 64.0;
        let tilt = solve_tilt(&space.radius_law, dim, rho)?;
        let (s1, s2) = random_radius_components(space, &tilt, delta, n, shrink);
        let v = s1 + s2;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, tilt));
        }
    }
    Ok(best.expect("64 candidates").1)
}

/// Default target mean: `α / 2` when attainable, otherwise the midpoint
/// between the smallest value of `R^d` and `α`.
pub fn default_rho(space: &SpaceSpec) -> f64 {
    let dim = space.dim;
    let floor = space.radius_law.r_min(dim).powi(dim as i32);
    let alpha = space.radius_law.mean_pow(dim);
    if alpha / 2.0 > floor {
        alpha / 2.0
    } else {
        0.5 * (floor + alpha)
    }
}
