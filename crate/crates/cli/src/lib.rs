//! Command-line front end: `denoise`, `compare`, `synthetic` and `verify`.
//!
//! Every CSV written here starts with a `#` line carrying the tool version,
//! a SHA-256 hash of the run configuration and the seed. Apart from timing
//! columns, outputs are a pure function of that configuration.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use minlift::diagnostics::{fit_rate, snr, study_affine_family, RateReport};
use minlift::families::{case_family, cone_triple, monotone_family, zero_triple, Case};
use minlift::imaging::{
    add_gaussian_noise, denoise, load_pgm, save_pgm, shepp_logan, DenoiseAlgorithm, DenoiseParams, ImageGray, PgmFormat,
};
use minlift::primal_dual::ReferenceMode;
use minlift::splitting::{mt_fixed_point_residual, IterationTrace, Status};
use minlift::verify::{run_suites, VerifyConfig};
use minlift::{HVector, LiftedPoint};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const MAX_ITER: u8 = 2;
    pub const SUITE_FAILED: u8 = 3;
    pub const USAGE: u8 = 64;
}

/// Invalid configuration detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

/// Exit code for an error returned by [`run`].
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return exit::USAGE;
    }
    match err.downcast_ref::<minlift::Error>() {
        Some(minlift::Error::Usage(_)) => exit::USAGE,
        _ => exit::FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "minlift",
    version,
    about = "Minimal-lifting splitting, primal-dual TV denoising and diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add seeded noise to an image, denoise it and report SNR and rate.
    Denoise(DenoiseArgs),
    /// Compare the primal-dual method with product-space Douglas-Rachford.
    Compare(CompareArgs),
    /// Rate studies on random affine operator families.
    Synthetic(SyntheticArgs),
    /// Run the property suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ImageSource {
    /// Clean PGM image; the built-in phantom is used when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Side length of the phantom.
    #[arg(long, default_value_t = 96)]
    pub size: usize,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lambda2: f64,
    #[arg(long, default_value_t = 0.0001)]
    pub lambda3: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda4: f64,
    /// Standard deviation of the added noise.
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

impl ModelArgs {
    fn params(&self, seed: u64) -> anyhow::Result<DenoiseParams> {
        let p = DenoiseParams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            lambda4: self.lambda4,
            gamma: self.gamma,
            noise_sigma: self.sigma,
            seed,
            tol: self.tol,
            max_iter: self.max_iter,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Mt,
    DrProduct,
}

impl From<Algorithm> for DenoiseAlgorithm {
    fn from(a: Algorithm) -> Self {
        match a {
            Algorithm::Mt => DenoiseAlgorithm::Mt,
            Algorithm::DrProduct => DenoiseAlgorithm::DrProduct,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub source: ImageSource,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Algorithm::Mt)]
    pub algorithm: Algorithm,
    /// Restored image (binary PGM unless `--ascii`).
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    #[serde(skip)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub ascii: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: ImageSource,
    #[command(flatten)]
    pub model: ModelArgs,
    /// First noise seed; repeat `r` uses `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Result CSV; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Last operator strongly monotone, the others Lipschitz.
    A,
    /// First n-1 operators strongly monotone and Lipschitz.
    B,
    /// Three zero operators on the real line.
    ZeroTriple,
    /// Three shifted normal cones on the real line.
    ConeTriple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RowFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args, Serialize)]
pub struct SyntheticArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    /// Monotonicity modulus; 0 gives a merely monotone family.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 2.0)]
    pub lip: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = FamilyKind::B)]
    pub case: FamilyKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of instances; instance `r` uses `seed + r`.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = RowFormat::Csv)]
    #[serde(skip)]
    pub format: RowFormat,
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Run only this suite.
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long, default_value_t = VerifyConfig::default().seed)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub corrupt_prox: bool,
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Denoise(a) => cmd_denoise(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Synthetic(a) => cmd_synthetic(&a),
        Command::Verify(a) => cmd_verify(&a),
    }
}

/// Hex SHA-256 of the JSON form of `config`, tagged with the subcommand.
pub fn config_hash(command: &str, config: &impl Serialize) -> anyhow::Result<String> {
    let json = serde_json::to_string(&(command, config))?;
    Ok(Sha256::digest(json.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

fn header_line(command: &str, config: &impl Serialize, seed: u64) -> anyhow::Result<String> {
    Ok(format!(
        "# minlift {VERSION} config={} seed={seed}\n",
        config_hash(command, config)?
    ))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn write_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Thread pool capped by `MINLIFT_THREADS` when set.
fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MINLIFT_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => builder = builder.num_threads(n),
            _ => return usage(format!("MINLIFT_THREADS must be a positive integer, got '{v}'")),
        }
    }
    Ok(builder.build()?)
}

fn load_source(src: &ImageSource) -> anyhow::Result<(String, ImageGray)> {
    match &src.input {
        Some(path) => {
            let img = load_pgm(path).with_context(|| format!("cannot read {}", path.display()))?;
            let name = path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
            Ok((name, img))
        }
        None => {
            if src.size == 0 {
                return usage("--size must be at least 1");
            }
            Ok(("phantom".to_string(), shepp_logan(src.size)?))
        }
    }
}

/// Trace rows `k,norm_change,dist_to_ref,gap,elapsed_ms`.
pub fn trace_csv(header: &str, trace: &IterationTrace) -> String {
    let mut out = String::from(header);
    out.push_str("k,norm_change,dist_to_ref,gap,elapsed_ms\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3}",
            r.k,
            r.norm_change,
            fmt_opt(r.dist_to_ref),
            fmt_opt(r.gap),
            r.elapsed_ms
        );
    }
    out
}

pub fn cmd_denoise(args: &DenoiseArgs) -> anyhow::Result<u8> {
    let params = args.model.params(args.seed)?;
    let (_, clean) = load_source(&args.source)?;
    let noisy = add_gaussian_noise(&clean, params.noise_sigma, params.seed)?;
    let outcome = denoise(&noisy, &params, args.algorithm.into(), ReferenceMode::Auto)?;
    if let Some(path) = &args.output {
        let format = if args.ascii {
            PgmFormat::Ascii
        } else {
            PgmFormat::Binary
        };
        save_pgm(&outcome.restored, path, format).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.trace {
        let header = header_line("denoise", args, args.seed)?;
        write_text(Some(path), &trace_csv(&header, &outcome.trace))?;
    }
    let snr_db = snr(&clean, &outcome.restored)?;
    let rate = fit_rate(&outcome.trace)
        .map(|r| format!("{:.4}", r.fitted_rate))
        .unwrap_or_else(|_| "n/a".to_string());
    let status = outcome.trace.status;
    println!(
        "algorithm={} iterations={} status={} snr_db={snr_db:.4} fitted_rate={rate}",
        args.algorithm
            .to_possible_value()
            .map_or("?".into(), |v| v.get_name().to_string()),
        outcome.iterations(),
        status.as_str()
    );
    match status {
        Status::Converged => Ok(exit::OK),
        Status::MaxIter => Ok(exit::MAX_ITER),
        Status::Diverged => Err(anyhow!("iteration diverged")),
    }
}

#[derive(Clone, Copy, Debug)]
struct RepeatResult {
    iterations: usize,
    distance: f64,
    seconds: f64,
}

fn compare_repeat(clean: &ImageGray, params: &DenoiseParams, alg: DenoiseAlgorithm) -> anyhow::Result<RepeatResult> {
    let noisy = add_gaussian_noise(clean, params.noise_sigma, params.seed)?;
    let start = Instant::now();
    let timed = denoise(&noisy, params, alg, ReferenceMode::None)?;
    let seconds = start.elapsed().as_secs_f64();
    let traced = denoise(&noisy, params, alg, ReferenceMode::Auto)?;
    let distance = traced
        .trace
        .records
        .last()
        .and_then(|r| r.dist_to_ref)
        .unwrap_or(f64::NAN);
    Ok(RepeatResult {
        iterations: timed.iterations(),
        distance,
        seconds,
    })
}

pub const COMPARE_COLUMNS: [&str; 7] = [
    "image",
    "size",
    "algorithm",
    "repeats",
    "mean_iterations",
    "mean_distance",
    "mean_time_s",
];

pub fn cmd_compare(args: &CompareArgs) -> anyhow::Result<u8> {
    if args.repeats == 0 {
        return usage("--repeats must be at least 1");
    }
    args.model.params(args.seed)?;
    let (name, clean) = load_source(&args.source)?;
    let pool = thread_pool()?;
    let mut out = header_line("compare", args, args.seed)?;
    out.push_str(&COMPARE_COLUMNS.join(","));
    out.push('\n');
    for alg in [Algorithm::Mt, Algorithm::DrProduct] {
        let seeds: Vec<u64> = (0..args.repeats as u64).map(|r| args.seed + r).collect();
        let results = pool.install(|| {
            seeds
                .par_iter()
                .map(|&seed| compare_repeat(&clean, &args.model.params(seed)?, alg.into()))
                .collect::<anyhow::Result<Vec<_>>>()
        })?;
        let r = results.len() as f64;
        let mean_iter = results.iter().map(|x| x.iterations as f64).sum::<f64>() / r;
        let mean_dist = results.iter().map(|x| x.distance).sum::<f64>() / r;
        let mean_time = results.iter().map(|x| x.seconds).sum::<f64>() / r;
        let alg_name = DenoiseAlgorithm::from(alg).as_str();
        let _ = writeln!(
            out,
            "{name},{},{alg_name},{},{mean_iter},{mean_dist:e},{mean_time:.6}",
            clean.side(),
            args.repeats
        );
    }
    write_text(args.output.as_deref(), &out)?;
    Ok(exit::OK)
}

/// One synthetic study row.
#[derive(Clone, Debug, Serialize)]
pub struct SyntheticRow {
    pub seed: u64,
    pub family: FamilyKind,
    pub n: usize,
    pub dim: usize,
    pub mu: f64,
    pub lip: f64,
    pub gamma: f64,
    pub iterations: Option<usize>,
    pub fitted_rate: Option<f64>,
    pub r_squared: Option<f64>,
    pub theoretical_beta: Option<f64>,
    pub max_ratio: Option<f64>,
    pub exact_fixed_points: Option<usize>,
    pub note: String,
}

pub const SYNTHETIC_COLUMNS: [&str; 14] = [
    "seed",
    "family",
    "n",
    "dim",
    "mu",
    "lip",
    "gamma",
    "iterations",
    "fitted_rate",
    "r_squared",
    "theoretical_beta",
    "max_ratio",
    "exact_fixed_points",
    "note",
];

impl SyntheticRow {
    fn csv(&self) -> String {
        let family = self
            .family
            .to_possible_value()
            .map_or(String::new(), |v| v.get_name().to_string());
        [
            self.seed.to_string(),
            family,
            self.n.to_string(),
            self.dim.to_string(),
            self.mu.to_string(),
            self.lip.to_string(),
            self.gamma.to_string(),
            self.iterations.map_or_else(String::new, |k| k.to_string()),
            fmt_opt(self.fitted_rate),
            fmt_opt(self.r_squared),
            fmt_opt(self.theoretical_beta),
            fmt_opt(self.max_ratio),
            self.exact_fixed_points.map_or_else(String::new, |k| k.to_string()),
            self.note.clone(),
        ]
        .join(",")
    }
}

fn validate_synthetic(a: &SyntheticArgs) -> anyhow::Result<()> {
    if !(a.gamma > 0.0 && a.gamma < 1.0) {
        return usage(format!("--gamma must lie in (0, 1), got {}", a.gamma));
    }
    if a.repeats == 0 {
        return usage("--repeats must be at least 1");
    }
    if !(a.tol > 0.0) || a.max_iter == 0 {
        return usage("--tol must be positive and --max-iter at least 1");
    }
    if matches!(a.case, FamilyKind::A | FamilyKind::B) {
        if a.n < 2 || a.dim == 0 {
            return usage(format!("need n >= 2 and dim >= 1, got n={}, dim={}", a.n, a.dim));
        }
        if !(a.mu >= 0.0) || !a.mu.is_finite() {
            return usage(format!("--mu must be non-negative, got {}", a.mu));
        }
        if !(a.lip > 0.0) || !a.lip.is_finite() {
            return usage(format!("--lip must be positive, got {}", a.lip));
        }
        if a.case == FamilyKind::B && a.mu > a.lip {
            return usage(format!("case b needs mu <= L, got mu={}, L={}", a.mu, a.lip));
        }
    }
    if a.case == FamilyKind::ConeTriple && !(a.mu > 0.0) {
        return usage(format!("cone-triple needs mu > 0, got {}", a.mu));
    }
    Ok(())
}

/// Counts sampled points on the known fixed ray that `T_MT` leaves exactly
/// unchanged.
fn fixed_ray_row(a: &SyntheticArgs, seed: u64) -> anyhow::Result<SyntheticRow> {
    let (problem, diagonal) = match a.case {
        FamilyKind::ZeroTriple => (zero_triple(a.gamma)?, true),
        _ => (cone_triple(a.mu, a.gamma)?, false),
    };
    let mut exact = 0;
    for i in 0..16u64 {
        let t = -((seed.wrapping_mul(31) + i) as f64) * 0.75;
        let second = if diagonal { t } else { 0.0 };
        let z = LiftedPoint::new(vec![HVector::new(vec![t])?, HVector::new(vec![second])?])?;
        if mt_fixed_point_residual(&problem, &z)?.residual == 0.0 {
            exact += 1;
        }
    }
    let note = if exact >= 2 {
        "not a contraction"
    } else {
        "fewer than two exact fixed points found"
    };
    Ok(SyntheticRow {
        seed,
        family: a.case,
        n: 3,
        dim: 1,
        mu: if diagonal { 0.0 } else { a.mu },
        lip: f64::INFINITY,
        gamma: a.gamma,
        iterations: None,
        fitted_rate: None,
        r_squared: None,
        theoretical_beta: None,
        max_ratio: None,
        exact_fixed_points: Some(exact),
        note: note.to_string(),
    })
}

fn study_row(a: &SyntheticArgs, seed: u64) -> anyhow::Result<SyntheticRow> {
    let fam = if a.mu == 0.0 {
        monotone_family(a.n, a.dim, a.lip, seed)?
    } else {
        let case = if a.case == FamilyKind::A { Case::A } else { Case::B };
        case_family(case, a.n, a.dim, a.mu, a.lip, seed)?
    };
    let study = study_affine_family(&fam, a.gamma, 20, a.tol, a.max_iter, seed)?;
    let beta = study.certificate.as_ref().map(|c| c.beta);
    let rate: Option<&RateReport> = study.rate.as_ref();
    let note = match (beta, rate) {
        (None, _) => "no certificate: mu = 0".to_string(),
        (Some(_), None) => "trace too short to fit".to_string(),
        (Some(b), Some(r)) if r.fitted_rate <= b => String::new(),
        (Some(_), Some(_)) => "fitted rate above beta".to_string(),
    };
    Ok(SyntheticRow {
        seed,
        family: a.case,
        n: a.n,
        dim: a.dim,
        mu: a.mu,
        lip: a.lip,
        gamma: a.gamma,
        iterations: Some(study.iterations),
        fitted_rate: rate.map(|r| r.fitted_rate),
        r_squared: rate.map(|r| r.r_squared),
        theoretical_beta: beta,
        max_ratio: Some(study.max_ratio),
        exact_fixed_points: None,
        note,
    })
}

pub fn synthetic_rows(args: &SyntheticArgs) -> anyhow::Result<Vec<SyntheticRow>> {
    validate_synthetic(args)?;
    let pool = thread_pool()?;
    let seeds: Vec<u64> = (0..args.repeats as u64).map(|r| args.seed + r).collect();
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| match args.case {
                FamilyKind::ZeroTriple | FamilyKind::ConeTriple => fixed_ray_row(args, seed),
                FamilyKind::A | FamilyKind::B => study_row(args, seed),
            })
            .collect()
    })
}

pub fn cmd_synthetic(args: &SyntheticArgs) -> anyhow::Result<u8> {
    let rows = synthetic_rows(args)?;
    let mut out = String::new();
    match args.format {
        RowFormat::Csv => {
            out.push_str(&header_line("synthetic", args, args.seed)?);
            out.push_str(&SYNTHETIC_COLUMNS.join(","));
            out.push('\n');
            for row in &rows {
                out.push_str(&row.csv());
                out.push('\n');
            }
        }
        RowFormat::Jsonl => {
            for row in &rows {
                out.push_str(&serde_json::to_string(row)?);
                out.push('\n');
            }
        }
    }
    write_text(args.output.as_deref(), &out)?;
    Ok(exit::OK)
}

pub fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    let cfg = VerifyConfig {
        seed: args.seed,
        corrupt_prox: args.corrupt_prox,
    };
    let outcomes = run_suites(args.suite.as_deref(), &cfg)?;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(exit::OK)
    } else {
        eprintln!("failed suites: {}", failed.join(", "));
        Ok(exit::SUITE_FAILED)
    }
}
