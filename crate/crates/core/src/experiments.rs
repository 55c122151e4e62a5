//! Work-versus-intensity experiments in the unit square.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::work_per_sample;
use crate::geometry::{Metric, SpaceSpec};
use crate::radius::RadiusLaw;
use crate::samplers::{Sampler, SamplerKind, SamplerOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Exp1,
    Exp2a,
    Exp2b,
    Exp3,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Exp1, Preset::Exp2a, Preset::Exp2b, Preset::Exp3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Exp1 => "exp1",
            Preset::Exp2a => "exp2a",
            Preset::Exp2b => "exp2b",
            Preset::Exp3 => "exp3",
        }
    }

    /// `(r, η, λ grid)`; all presets are fixed radius, `d = 2`, Euclidean.
    pub fn parameters(self) -> (f64, f64, &'static [f64]) {
        match self {
            Preset::Exp1 => (1.0, 0.4, &[4.0, 6.0, 8.0, 10.0, 12.0]),
            Preset::Exp2a => (1.0, 0.5, &[4.0, 8.0, 12.0, 16.0]),
            Preset::Exp2b => (0.05, 0.5, &[25.0, 50.0, 100.0, 200.0]),
            Preset::Exp3 => (1.0, 0.75, &[4.0, 8.0, 16.0, 32.0]),
        }
    }

    pub fn space(self, lambda: f64) -> Result<SpaceSpec> {
        let (r, eta, _) = self.parameters();
        SpaceSpec::new(2, Metric::Euclidean, lambda, eta, RadiusLaw::Constant(r))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown preset '{s}' (expected exp1|exp2a|exp2b|exp3)")))
    }
}

pub const EXPERIMENT_SAMPLERS: [SamplerKind; 5] = [
    SamplerKind::Naive,
    SamplerKind::GridIs,
    SamplerKind::DcftpLoss,
    SamplerKind::DcftpWithoutSwaps,
    SamplerKind::DcftpWithSwaps,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRow {
    pub lambda: f64,
    pub sampler: SamplerKind,
    pub s_hat: f64,
    pub se: f64,
    pub acc_prob: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExperimentOptions {
    /// Record 0 instead of wall-clock time, making output byte-reproducible.
    pub no_timing: bool,
    pub sampler: SamplerOptions,
}

/// Runs `t` replicates of every sampler at every intensity of the preset.
/// A cell that hits the iteration cap is reported as NaN.
pub fn run_experiment(preset: Preset, t: u64, seed: u64, opts: &ExperimentOptions) -> Result<Vec<ExperimentRow>> {
    let (_, _, lambdas) = preset.parameters();
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let space = preset.space(lambda)?;
        for kind in EXPERIMENT_SAMPLERS {
            let sampler = Sampler::new(&space, kind, opts.sampler)?;
            let row = match work_per_sample(&sampler, t, seed) {
                Ok(w) => ExperimentRow {
                    lambda,
                    sampler: kind,
                    s_hat: w.spheres.value,
                    se: w.spheres.std_error,
                    acc_prob: w.acc_prob,
                    wall_ms: if opts.no_timing { 0.0 } else { w.wall_ms },
                },
                Err(Error::Timeout(_)) => ExperimentRow {
                    lambda,
                    sampler: kind,
                    s_hat: f64::NAN,
                    se: f64::NAN,
                    acc_prob: f64::NAN,
                    wall_ms: f64::NAN,
                },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "lambda,sampler,S_hat,se,acc_prob,wall_ms";

pub fn write_csv<W: Write>(rows: &[ExperimentRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_sig(r.lambda),
            r.sampler,
            fmt_sig(r.s_hat),
            fmt_sig(r.se),
            fmt_sig(r.acc_prob),
            fmt_sig(r.wall_ms)
        )?;
    }
    Ok(())
}

/// Nine significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
