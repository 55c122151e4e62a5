//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimators::{
    acceptance_identity, chi_square_homogeneity, count_histogram, draw_samples, estimate_pno, insertion_probability,
    work_per_sample,
};
use crate::experiments::{fmt_sig, run_experiment, write_csv, ExperimentOptions, Preset};
use crate::geometry::{Metric, SpaceSpec};
use crate::radius::RadiusLaw;
use crate::samplers::{SamplerKind, SamplerOptions, Sampler};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;

#[derive(Parser, Debug, Clone, PartialEq)]
#[command(name = "hardsphere", version, about = "Perfect samplers for hard-sphere point processes")]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct ModelArgs {
    /// Dimension.
    #[arg(long = "d", default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = Metric::Torus)]
    pub metric: Metric,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    /// Radius law: const:R | twopoint:a,b,p | unif:lo,hi. Two-point values
    /// are values of R^d, taken with probabilities p and 1-p.
    #[arg(long, default_value = "const:1")]
    pub radius: RadiusLaw,
}

impl ModelArgs {
    pub fn space(&self) -> Result<SpaceSpec> {
        SpaceSpec::new(self.d, self.metric, self.lambda, self.eta, self.radius.clone())
    }

    fn push_args(&self, out: &mut Vec<String>) {
        push(out, "--d", self.d);
        push(out, "--metric", self.metric);
        push(out, "--lambda", self.lambda);
        push(out, "--eta", self.eta);
        push(out, "--radius", &self.radius);
    }
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for replicates; defaults to all cores.
    #[arg(long, env = "HARDSPHERE_THREADS")]
    pub threads: Option<usize>,
    /// Output file, or `-` for standard output.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
    /// Give up (exit 3) after this many AR iterations or DCFTP doubling rounds.
    #[arg(long)]
    pub max_iterations: Option<u64>,
}

impl RunArgs {
    fn push_args(&self, out: &mut Vec<String>) {
        push(out, "--seed", self.seed);
        if let Some(t) = self.threads {
            push(out, "--threads", t);
        }
        push(out, "--output", self.output.display());
        if let Some(m) = self.max_iterations {
            push(out, "--max-iterations", m);
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = SamplerKind::GridIs)]
    pub sampler: SamplerKind,
    /// Number of replicates.
    #[arg(long = "T", default_value_t = 1)]
    pub t: u64,
    /// Target mean of R^d for the random-radius tilt.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
}

impl SamplerArgs {
    fn options(&self, run: &RunArgs) -> SamplerOptions {
        SamplerOptions { max_iterations: run.max_iterations, delta: self.delta, rho: self.rho, ..Default::default() }
    }

    fn push_args(&self, out: &mut Vec<String>) {
        push(out, "--sampler", self.sampler);
        push(out, "--T", self.t);
        if let Some(r) = self.rho {
            push(out, "--rho", r);
        }
        push(out, "--delta", self.delta);
    }
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Command {
    /// Draw perfect samples as CSV rows `sample_id,x1..xd,radius`.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Estimate the probability that independent spheres do not overlap.
    Pno {
        #[command(flatten)]
        model: ModelArgs,
        /// Fixed sphere count; Poisson(lambda) when absent.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Mean spheres generated per perfect sample.
    Work {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Probability that a uniform extra sphere fits into a perfect sample.
    Insertion {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a preset work-versus-intensity experiment.
    Experiment {
        #[arg(long)]
        preset: Preset,
        #[arg(long = "T", default_value_t = 200)]
        t: u64,
        /// Write 0 in the wall_ms column so output is reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Cross-sampler chi-square battery and acceptance identity check.
    Validate {
        /// Smaller replicate counts.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn push(out: &mut Vec<String>, flag: &str, value: impl std::fmt::Display) {
    out.push(flag.to_string());
    out.push(value.to_string());
}

impl CliConfig {
    /// Full argument vector with every option spelled out.
    pub fn to_args(&self) -> Vec<String> {
        let mut out = vec!["hardsphere".to_string()];
        match &self.command {
            Command::Sample { model, sampler, run }
            | Command::Work { model, sampler, run }
            | Command::Insertion { model, sampler, run } => {
                out.push(self.command.name().into());
                model.push_args(&mut out);
                sampler.push_args(&mut out);
                run.push_args(&mut out);
            }
            Command::Pno { model, n, trials, run } => {
                out.push("pno".into());
                model.push_args(&mut out);
                if let Some(n) = n {
                    push(&mut out, "--n", n);
                }
                push(&mut out, "--trials", trials);
                run.push_args(&mut out);
            }
            Command::Experiment { preset, t, no_timing, run } => {
                out.push("experiment".into());
                push(&mut out, "--preset", preset);
                push(&mut out, "--T", t);
                if *no_timing {
                    out.push("--no-timing".into());
                }
                run.push_args(&mut out);
            }
            Command::Validate { quick, run } => {
                out.push("validate".into());
                if *quick {
                    out.push("--quick".into());
                }
                run.push_args(&mut out);
            }
        }
        out
    }

    /// Space-separated canonical form; parses back to an equal config.
    pub fn canonical(&self) -> String {
        self.to_args().join(" ")
    }

    pub fn from_canonical(s: &str) -> std::result::Result<Self, clap::Error> {
        CliConfig::try_parse_from(s.split_whitespace())
    }

    fn run_args(&self) -> &RunArgs {
        match &self.command {
            Command::Sample { run, .. }
            | Command::Pno { run, .. }
            | Command::Work { run, .. }
            | Command::Insertion { run, .. }
            | Command::Experiment { run, .. }
            | Command::Validate { run, .. } => run,
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample { .. } => "sample",
            Command::Pno { .. } => "pno",
            Command::Work { .. } => "work",
            Command::Insertion { .. } => "insertion",
            Command::Experiment { .. } => "experiment",
            Command::Validate { .. } => "validate",
        }
    }
}

fn open_output(path: &PathBuf) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let f = File::create(path).map_err(|e| Error::Usage(format!("cannot create {}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn io_err(e: io::Error) -> Error {
    Error::Internal(format!("write failed: {e}"))
}

/// Validation verdict: `Ok(true)` when every check passed.
type Verdict = Result<bool>;

/// Runs a parsed command and returns the process exit code.
pub fn execute(cfg: &CliConfig) -> i32 {
    let run = cfg.run_args();
    let pool = match run.threads {
        Some(0) => {
            eprintln!("usage error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("internal error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match pool.install(|| dispatch(cfg)) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VALIDATION,
        Err(e) => {
            eprintln!("{e}");
            match e {
                Error::Usage(_) | Error::DegenerateTilt(_) => EXIT_USAGE,
                Error::Timeout(_) => EXIT_TIMEOUT,
                Error::InsufficientData(_) | Error::Internal(_) => EXIT_VALIDATION,
            }
        }
    }
}

fn check_sampler_fits(kind: SamplerKind, space: &SpaceSpec) -> Result<()> {
    let constant = space.radius_law.is_constant();
    match kind {
        SamplerKind::Exact1d if space.dim != 1 || !constant => {
            Err(Error::Usage("is-1d needs d = 1 and a constant radius".into()))
        }
        SamplerKind::GridIs if !constant => Err(Error::Usage("grid-is needs a constant radius".into())),
        SamplerKind::RandomRadiusIs if constant => Err(Error::Usage("rr-is needs a non-constant radius law".into())),
        _ => Ok(()),
    }
}

fn prepare(model: &ModelArgs, sampler: &SamplerArgs, run: &RunArgs) -> Result<Sampler> {
    let space = model.space()?;
    check_sampler_fits(sampler.sampler, &space)?;
    if sampler.t == 0 {
        return Err(Error::Usage("--T must be at least 1".into()));
    }
    Sampler::new(&space, sampler.sampler, sampler.options(run))
}

fn dispatch(cfg: &CliConfig) -> Verdict {
    match &cfg.command {
        Command::Sample { model, sampler, run } => {
            let s = prepare(model, sampler, run)?;
            let samples = draw_samples(&s, sampler.t, run.seed)?;
            let mut out = open_output(&run.output)?;
            let coords: Vec<String> = (1..=model.d).map(|i| format!("x{i}")).collect();
            writeln!(out, "sample_id,{},radius", coords.join(",")).map_err(io_err)?;
            for (i, (cfg, _)) in samples.iter().enumerate() {
                let mut spheres: Vec<_> = cfg.spheres().to_vec();
                spheres.sort_by_key(|s| s.id);
                for s in spheres {
                    let xs: Vec<String> = s.center.iter().map(|&x| fmt_sig(x)).collect();
                    writeln!(out, "{i},{},{}", xs.join(","), fmt_sig(s.radius)).map_err(io_err)?;
                }
            }
            out.flush().map_err(io_err)?;
            Ok(true)
        }
        Command::Pno { model, n, trials, run } => {
            let space = model.space()?;
            if *trials == 0 {
                return Err(Error::Usage("--trials must be at least 1".into()));
            }
            let e = estimate_pno(&space, *n, *trials, run.seed)?;
            let mut out = open_output(&run.output)?;
            writeln!(out, "estimate,se,trials,seed").map_err(io_err)?;
            writeln!(out, "{},{},{},{}", fmt_sig(e.value), fmt_sig(e.std_error), e.n_samples, e.seed).map_err(io_err)?;
            out.flush().map_err(io_err)?;
            Ok(true)
        }
        Command::Work { model, sampler, run } => {
            let s = prepare(model, sampler, run)?;
            let w = work_per_sample(&s, sampler.t, run.seed)?;
            let mut out = open_output(&run.output)?;
            writeln!(out, "lambda,sampler,S_hat,se,acc_prob,iterations").map_err(io_err)?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_sig(model.lambda),
                sampler.sampler,
                fmt_sig(w.spheres.value),
                fmt_sig(w.spheres.std_error),
                fmt_sig(w.acc_prob),
                w.totals.iterations
            )
            .map_err(io_err)?;
            out.flush().map_err(io_err)?;
            Ok(true)
        }
        Command::Insertion { model, sampler, run } => {
            let s = prepare(model, sampler, run)?;
            let e = insertion_probability(&s, sampler.t, run.seed)?;
            let mut out = open_output(&run.output)?;
            writeln!(out, "estimate,se,T,seed").map_err(io_err)?;
            writeln!(out, "{},{},{},{}", fmt_sig(e.value), fmt_sig(e.std_error), e.n_samples, e.seed).map_err(io_err)?;
            out.flush().map_err(io_err)?;
            Ok(true)
        }
        Command::Experiment { preset, t, no_timing, run } => {
            if *t == 0 {
                return Err(Error::Usage("--T must be at least 1".into()));
            }
            let opts = ExperimentOptions {
                no_timing: *no_timing,
                sampler: SamplerOptions { max_iterations: run.max_iterations, ..Default::default() },
            };
            let rows = run_experiment(*preset, *t, run.seed, &opts)?;
            let mut out = open_output(&run.output)?;
            write_csv(&rows, &mut out).map_err(io_err)?;
            out.flush().map_err(io_err)?;
            Ok(true)
        }
        Command::Validate { quick, run } => validate(*quick, run),
    }
}

/// Significance level for the chi-square battery.
pub const CHI_SQUARE_ALPHA: f64 = 1e-3;

fn validate(quick: bool, run: &RunArgs) -> Verdict {
    let t = if quick { 1_000 } else { 5_000 };
    let iterations = if quick { 20_000 } else { 100_000 };
    let mut out = open_output(&run.output)?;
    let mut all = true;
    let mut report = |name: &str, pass: bool, detail: String| -> Result<()> {
        all &= pass;
        writeln!(out, "{} {name}: {detail}", if pass { "PASS" } else { "FAIL" }).map_err(io_err)
    };

    let opts = SamplerOptions { max_iterations: run.max_iterations, ..Default::default() };
    let square = SpaceSpec::new(2, Metric::Euclidean, 5.0, 0.5, RadiusLaw::Constant(0.5))?;
    let kinds = [
        SamplerKind::Naive,
        SamplerKind::GridIs,
        SamplerKind::DcftpLoss,
        SamplerKind::DcftpWithoutSwaps,
        SamplerKind::DcftpWithSwaps,
    ];
    let mut hists = Vec::new();
    for (k, kind) in kinds.iter().enumerate() {
        let s = Sampler::new(&square, *kind, opts)?;
        let w = work_per_sample(&s, t, run.seed.wrapping_add(k as u64))?;
        hists.push(count_histogram(&w.counts));
    }
    for i in 0..kinds.len() {
        for j in i + 1..kinds.len() {
            let c = chi_square_homogeneity(&hists[i], &hists[j])?;
            report(
                &format!("counts {} vs {}", kinds[i], kinds[j]),
                c.p_value > CHI_SQUARE_ALPHA,
                format!("chi2={} dof={} p={}", fmt_sig(c.statistic), c.dof, fmt_sig(c.p_value)),
            )?;
        }
    }

    let extra = [
        (SpaceSpec::new(1, Metric::Torus, 5.0, 0.5, RadiusLaw::Constant(0.2))?, SamplerKind::Exact1d),
        (
            SpaceSpec::new(2, Metric::Euclidean, 5.0, 0.5, RadiusLaw::TwoPoint { low: 0.04, high: 0.25, p_low: 0.5 })?,
            SamplerKind::RandomRadiusIs,
        ),
    ];
    for (k, (space, kind)) in extra.iter().enumerate() {
        let seed = run.seed.wrapping_add(100 + 2 * k as u64);
        let a = work_per_sample(&Sampler::new(space, SamplerKind::Naive, opts)?, t, seed)?;
        let b = work_per_sample(&Sampler::new(space, *kind, opts)?, t, seed + 1)?;
        let c = chi_square_homogeneity(&count_histogram(&a.counts), &count_histogram(&b.counts))?;
        report(
            &format!("counts naive vs {kind} (d={})", space.dim),
            c.p_value > CHI_SQUARE_ALPHA,
            format!("chi2={} dof={} p={}", fmt_sig(c.statistic), c.dof, fmt_sig(c.p_value)),
        )?;
    }

    let naive = Sampler::new(&square, SamplerKind::Naive, opts)?;
    let grid = Sampler::new(&square, SamplerKind::GridIs, opts)?;
    let id = acceptance_identity(&naive, &grid, iterations, run.seed.wrapping_add(200))?;
    report(
        "acceptance identity grid-is",
        id.z.abs() <= 3.0,
        format!(
            "naive={} grid*E[sigma]={} z={}",
            fmt_sig(id.naive.value),
            fmt_sig(id.importance.value * id.expected_sigma),
            fmt_sig(id.z)
        ),
    )?;
    out.flush().map_err(io_err)?;
    Ok(all)
}
