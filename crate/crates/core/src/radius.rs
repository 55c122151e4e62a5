//! Radius laws, the log-MGF of `R^d`, and exponential tilting.
//!
//! `F` denotes the law of `X = R^d`. The tilt solves `Λ'(θ̂) = ϱ` for a target
//! mean `ϱ` below `E[X]`, which always gives `θ̂ < 0`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{usage, Error, Result};

/// Law of the unscaled radius `R`.
///
/// `TwoPoint` is parameterized by the two values of `R^d` (not of `R`) and
/// the probability of the lower one.
#[derive(Debug, Clone, PartialEq)]
pub enum RadiusLaw {
    Constant(f64),
    TwoPoint { low: f64, high: f64, p_low: f64 },
    UniformRange { lo: f64, hi: f64 },
}

impl RadiusLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            RadiusLaw::Constant(r) if ok(r) => Ok(()),
            RadiusLaw::Constant(r) => usage(format!("constant radius must be positive, got {r}")),
            RadiusLaw::TwoPoint { low, high, p_low } => {
                if ok(low) && ok(high) && low < high && p_low > 0.0 && p_low < 1.0 {
                    Ok(())
                } else {
                    usage(format!("two-point law needs 0 < low < high and 0 < p < 1, got ({low}, {high}, {p_low})"))
                }
            }
            RadiusLaw::UniformRange { lo, hi } => {
                if ok(lo) && ok(hi) && lo < hi {
                    Ok(())
                } else {
                    usage(format!("uniform law needs 0 < lo < hi, got ({lo}, {hi})"))
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RadiusLaw::Constant(_))
    }

    pub fn r_max(&self, dim: usize) -> f64 {
        match *self {
            RadiusLaw::Constant(r) => r,
            RadiusLaw::TwoPoint { high, .. } => high.powf(1.0 / dim as f64),
            RadiusLaw::UniformRange { hi, .. } => hi,
        }
    }

    pub fn r_min(&self, dim: usize) -> f64 {
        match *self {
            RadiusLaw::Constant(r) => r,
            RadiusLaw::TwoPoint { low, .. } => low.powf(1.0 / dim as f64),
            RadiusLaw::UniformRange { lo, .. } => lo,
        }
    }

    /// `E[R^d]`.
    pub fn mean_pow(&self, dim: usize) -> f64 {
        match *self {
            RadiusLaw::Constant(r) => r.powi(dim as i32),
            RadiusLaw::TwoPoint { low, high, p_low } => p_low * low + (1.0 - p_low) * high,
            RadiusLaw::UniformRange { lo, hi } => {
                let k = dim as i32 + 1;
                (hi.powi(k) - lo.powi(k)) / (k as f64 * (hi - lo))
            }
        }
    }

    /// Draw of `R` (unscaled).
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> f64 {
        match *self {
            RadiusLaw::Constant(r) => r,
            RadiusLaw::TwoPoint { low, high, p_low } => {
                let x = if rng.random::<f64>() < p_low { low } else { high };
                x.powf(1.0 / dim as f64)
            }
            RadiusLaw::UniformRange { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    /// `Λ(θ) = log E[exp(θ R^d)]`.
    pub fn log_mgf(&self, dim: usize, theta: f64) -> f64 {
        match *self {
            RadiusLaw::Constant(r) => theta * r.powi(dim as i32),
            RadiusLaw::TwoPoint { low, high, p_low } => {
                log_sum_exp2(p_low.ln() + theta * low, (1.0 - p_low).ln() + theta * high)
            }
            RadiusLaw::UniformRange { lo, hi } => {
                let shift = uniform_shift(lo, hi, dim, theta);
                let z = adaptive_simpson(|r| (theta * r.powi(dim as i32) - shift).exp(), lo, hi, 1e-13);
                shift + (z / (hi - lo)).ln()
            }
        }
    }

    /// `Λ'(θ)`, the mean of `R^d` under the law tilted by `θ`.
    pub fn log_mgf_derivative(&self, dim: usize, theta: f64) -> f64 {
        match *self {
            RadiusLaw::Constant(r) => r.powi(dim as i32),
            RadiusLaw::TwoPoint { low, high, p_low } => {
                let a = p_low.ln() + theta * low;
                let b = (1.0 - p_low).ln() + theta * high;
                let m = a.max(b);
                let (wa, wb) = ((a - m).exp(), (b - m).exp());
                (wa * low + wb * high) / (wa + wb)
            }
            RadiusLaw::UniformRange { lo, hi } => {
                let k = dim as i32;
                let shift = uniform_shift(lo, hi, dim, theta);
                let den = adaptive_simpson(|r| (theta * r.powi(k) - shift).exp(), lo, hi, 1e-13);
                let num = adaptive_simpson(|r| r.powi(k) * (theta * r.powi(k) - shift).exp(), lo, hi, 1e-13);
                num / den
            }
        }
    }
}

impl fmt::Display for RadiusLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RadiusLaw::Constant(r) => write!(f, "const:{r}"),
            RadiusLaw::TwoPoint { low, high, p_low } => write!(f, "twopoint:{low},{high},{p_low}"),
            RadiusLaw::UniformRange { lo, hi } => write!(f, "unif:{lo},{hi}"),
        }
    }
}

impl FromStr for RadiusLaw {
    type Err = Error;

    /// `const:r`, `twopoint:x_low,x_high,p_low` (values of `R^d`) or `unif:lo,hi`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("radius law '{s}' must look like kind:args")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Usage(format!("bad number in radius law '{s}': {e}")))?;
        let law = match (kind, nums.as_slice()) {
            ("const", [r]) => RadiusLaw::Constant(*r),
            ("twopoint", [low, high, p]) => RadiusLaw::TwoPoint { low: *low, high: *high, p_low: *p },
            ("unif", [lo, hi]) => RadiusLaw::UniformRange { lo: *lo, hi: *hi },
            _ => return usage(format!("unrecognized radius law '{s}'")),
        };
        law.validate()?;
        Ok(law)
    }
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

// Max of θ r^d over [lo, hi]; keeps the integrands in (0, 1].
fn uniform_shift(lo: f64, hi: f64, dim: usize, theta: f64) -> f64 {
    let k = dim as i32;
    (theta * lo.powi(k)).max(theta * hi.powi(k))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    // tolerance relative to the integral's scale
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    recurse(&f, a, b, fa, fm, fb, whole, tol * scale, 48)
}

/// Solved exponential tilt for a target mean `rho` of `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSpec {
    pub rho: f64,
    pub theta_hat: f64,
    pub log_mgf_at_theta_hat: f64,
    /// `Λ*(ϱ) = θ̂ ϱ - Λ(θ̂)`.
    pub rate_at_rho: f64,
}

impl TiltSpec {
    /// `dF/dF̃(x) = exp(-θ̂ x + Λ(θ̂))`.
    pub fn lr_factor(&self, x: f64) -> f64 {
        (-self.theta_hat * x + self.log_mgf_at_theta_hat).exp()
    }

    pub fn log_lr_factor(&self, x: f64) -> f64 {
        -self.theta_hat * x + self.log_mgf_at_theta_hat
    }
}

const TILT_TOL: f64 = 1e-10;

/// Solves `Λ'(θ̂) = rho` by bracketed bisection on `θ ≤ 0`.
pub fn solve_tilt(law: &RadiusLaw, dim: usize, rho: f64) -> Result<TiltSpec> {
    if law.is_constant() {
        return Err(Error::DegenerateTilt(
            "constant radius law has no tilt; use the fixed-radius sampler".into(),
        ));
    }
    let floor = law.r_min(dim).powi(dim as i32);
    let alpha = law.mean_pow(dim);
    if !(rho > floor && rho < alpha) {
        return Err(Error::DegenerateTilt(format!(
            "target mean {rho} must lie strictly between {floor} and {alpha}"
        )));
    }
    let tol = TILT_TOL * rho.abs().max(1.0);
    let deriv = |t: f64| law.log_mgf_derivative(dim, t);

    let mut lo = -64.0;
    while deriv(lo) > rho {
        lo *= 2.0;
        if lo < -1e15 {
            return Err(Error::DegenerateTilt(format!("could not bracket the tilt for target {rho}")));
        }
    }
    let mut hi = 0.0;
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..400 {
        theta = 0.5 * (lo + hi);
        let v = deriv(theta);
        if (v - rho).abs() <= tol {
            break;
        }
        if v > rho {
            hi = theta;
        } else {
            lo = theta;
        }
        if hi - lo <= f64::EPSILON * theta.abs().max(1e-300) {
            break;
        }
    }
    let residual = (deriv(theta) - rho).abs();
    if residual > tol {
        return Err(Error::DegenerateTilt(format!(
            "tilt solve stalled with residual {residual:e} for target {rho}"
        )));
    }
    let lmgf = law.log_mgf(dim, theta);
    Ok(TiltSpec {
        rho,
        theta_hat: theta,
        log_mgf_at_theta_hat: lmgf,
        rate_at_rho: theta * rho - lmgf,
    })
}

/// Draw of `X = R^d` from the tilted law `F̃`.
pub fn sample_tilted<R: Rng + ?Sized>(tilt: &TiltSpec, law: &RadiusLaw, dim: usize, rng: &mut R) -> f64 {
    let theta = tilt.theta_hat;
    match *law {
        RadiusLaw::Constant(r) => r.powi(dim as i32),
        RadiusLaw::TwoPoint { low, high, p_low } => {
            let p = (p_low.ln() + theta * low - tilt.log_mgf_at_theta_hat).exp();
            if rng.random::<f64>() < p {
                low
            } else {
                high
            }
        }
        RadiusLaw::UniformRange { lo, hi } => {
            let k = dim as i32;
            if dim == 1 {
                // inverse CDF of the truncated exponential on [lo, hi]
                let u: f64 = rng.random();
                let span = hi - lo;
                if (theta * span).abs() < 1e-12 {
                    return lo + u * span;
                }
                let r = lo + (u * (theta * span).exp_m1()).ln_1p() / theta;
                r.clamp(lo, hi)
            } else {
                // θ ≤ 0, so exp(θ (r^d - lo^d)) ≤ 1 is a valid acceptance ratio
                let base = lo.powi(k);
                loop {
                    let r = lo + (hi - lo) * rng.random::<f64>();
                    let x = r.powi(k);
                    if rng.random::<f64>() < (theta * (x - base)).exp() {
                        return x;
                    }
                }
            }
        }
    }
}
