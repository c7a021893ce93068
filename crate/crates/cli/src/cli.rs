//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 mask not
//! coercive (`check-coercivity` only). Diagnostics go to standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use smoothntf_core::diagnostics::{
    coercivity_check, nmse, psnr, psnr_masked, sim_score, ssim, ssim_masked, CvConfig, CvConvention, CvPlan,
    CvResult, SolverKind, SsimParams,
};
use smoothntf_core::model::CpModel;
use smoothntf_core::solvers::{
    grad_fit_with_clock, hals_fit_with_clock, Clock, FitReport, Init, NoClock, SolverConfig,
};
use smoothntf_core::{DenseTensor, NormSpec, NormalizedFactorModel, PenaltyConfig, SeminormSpec, WeightMask};

use crate::dnt::{read_tensor, write_tensor};
use crate::error::IoError;
use crate::fsutil::create_dir;
use crate::mask::{make_mask, MaskSpec};
use crate::model_io::{read_model, write_model};
use crate::netpbm::{read_image_ppm, write_image_ppm};
use crate::report::{cv_result_csv, fit_report_csv, key_value_csv, table_csv, write_report, InstantClock};
use crate::toy::{toy_generate, ToySpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_COERCIVE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "smoothntf", version, about = "Smooth non-negative tensor factorization with missing data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic smooth instance.
    GenToy(GenToyArgs),
    /// Fit a model to a tensor and mask.
    Factorize(FactorizeArgs),
    /// Complete a color image, penalizing the two spatial modes.
    Complete(CompleteArgs),
    /// Select the penalty weight by k-fold cross-validation.
    Cv(CvArgs),
    /// Check whether the objective is coercive for a mask.
    CheckCoercivity(CheckArgs),
    /// Compare an estimated model with the truth.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Hals,
    Grad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MuArg {
    Tv2,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Svd,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClockArg {
    /// Wall-clock timings in reports.
    Wall,
    /// Zero timings, making reports byte-identical across reruns.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    Standard,
    FitOnFold,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "hals")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "tv2")]
    mu: MuArg,
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, value_enum, default_value = "svd")]
    init: InitArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "wall")]
    clock: ClockArg,
}

#[derive(Debug, Args)]
struct GenToyArgs {
    #[arg(long)]
    size: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.5)]
    missing: f64,
    /// Noise level ν in percent.
    #[arg(long, default_value_t = 10.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FactorizeArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    w: PathBuf,
    #[arg(long)]
    rank: usize,
    /// One weight for every mode, or one per mode.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    alpha: Vec<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompleteArgs {
    #[arg(long)]
    image: PathBuf,
    /// `uniform:F`, `pixelwise:F` or `pgm:PATH`.
    #[arg(long)]
    mask: MaskSpec,
    #[arg(long, default_value_t = 50)]
    rank: usize,
    /// A single weight, or a grid selected by cross-validation.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    w: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1e-4,1e-3,1e-2,1e-1,1,10")]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Penalized modes, 1-based; all modes when omitted.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "standard")]
    convention: ConventionArg,
    #[command(flatten)]
    solver: SolverArgs,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    w: PathBuf,
    /// One weight per mode.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha: Vec<f64>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(IoError),
}

impl<E: Into<IoError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::GenToy(a) => gen_toy(a),
        Command::Factorize(a) => factorize(a),
        Command::Complete(a) => complete(a),
        Command::Cv(a) => cv(a),
        Command::CheckCoercivity(a) => check_coercivity(a),
        Command::Metrics(a) => metrics(a),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn seminorm(mu: MuArg) -> SeminormSpec {
    match mu {
        MuArg::Tv2 => SeminormSpec::tv2(),
        MuArg::Spline => SeminormSpec::spline(),
    }
}

fn expand_alpha(alpha: &[f64], order: usize) -> Result<Vec<f64>, Failure> {
    match alpha.len() {
        1 => Ok(vec![alpha[0]; order]),
        n if n == order => Ok(alpha.to_vec()),
        n => Err(Failure::Usage(format!("expected 1 or {order} alpha values, got {n}"))),
    }
}

fn penalty(alpha: Vec<f64>, penalized: &[bool], args: &SolverArgs) -> PenaltyConfig {
    let order = alpha.len();
    PenaltyConfig {
        alpha,
        d: args.d,
        p: args.p,
        mu: penalized.iter().map(|&on| on.then(|| seminorm(args.mu))).collect(),
        nu: vec![NormSpec::L2; order],
    }
}

fn solver_config(rank: usize, penalty: PenaltyConfig, args: &SolverArgs) -> SolverConfig {
    let mut cfg = SolverConfig::new(rank, penalty);
    cfg.max_iter = args.max_iter;
    cfg.rel_tol = args.tol;
    cfg.init = match args.init {
        InitArg::Svd => Init::SvdBased,
        InitArg::Random => Init::Random(args.seed),
    };
    cfg
}

fn solver_kind(s: SolverArg) -> SolverKind {
    match s {
        SolverArg::Hals => SolverKind::Hals,
        SolverArg::Grad => SolverKind::Grad,
    }
}

fn fit_with<C: Clock>(
    x: &DenseTensor,
    w: &WeightMask,
    cfg: &SolverConfig,
    solver: SolverArg,
    clock: &C,
) -> Result<(NormalizedFactorModel, FitReport), Failure> {
    Ok(match solver {
        SolverArg::Hals => hals_fit_with_clock(x, w, cfg, clock)?,
        SolverArg::Grad => {
            let (model, report) = grad_fit_with_clock(x, w, cfg, clock)?;
            (model.normalize_l2(), report)
        }
    })
}

fn fit(x: &DenseTensor, w: &WeightMask, cfg: &SolverConfig, args: &SolverArgs) -> Result<(NormalizedFactorModel, FitReport), Failure> {
    let (model, report) = match args.clock {
        ClockArg::Wall => fit_with(x, w, cfg, args.solver, &InstantClock::new())?,
        ClockArg::None => fit_with(x, w, cfg, args.solver, &NoClock)?,
    };
    log::info!(
        "{} iterations, final objective {:e}, {:.3e} s per iteration{}",
        report.iterations,
        report.final_objective(),
        report.tpi_seconds,
        if report.converged { "" } else { " (iteration limit reached)" }
    );
    Ok((model, report))
}

fn read_data(x: &Path, w: &Path) -> Result<(DenseTensor, WeightMask), Failure> {
    let x = read_tensor(x)?;
    let w = WeightMask::new(read_tensor(w)?)?;
    if x.shape() != w.shape() {
        return Err(Failure::Usage(format!("data {:?} and mask {:?} differ in shape", x.dims(), w.dims())));
    }
    Ok((x, w))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => write_report(path, bytes)?,
        None => std::io::stdout().write_all(bytes).map_err(|e| IoError::io("<stdout>", e))?,
    }
    Ok(())
}

fn run_cv(
    x: &DenseTensor,
    w: &WeightMask,
    grid: &[f64],
    cfg: &CvConfig,
) -> Result<CvResult, Failure> {
    let plan = CvPlan::new(x, w, grid, cfg)?;
    let results = plan
        .cells()
        .into_par_iter()
        .map(|cell| plan.evaluate(&cell).map(|score| (cell, score)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(plan.assemble(&results)?)
}

fn gen_toy(a: GenToyArgs) -> Outcome {
    let spec = ToySpec { size: a.size, rank: a.rank, noise_percent: a.noise, missing_fraction: a.missing, seed: a.seed };
    let data = toy_generate(&spec)?;
    create_dir(&a.out)?;
    write_tensor(&a.out.join("x.dnt"), &data.noisy)?;
    write_tensor(&a.out.join("w.dnt"), data.mask.tensor())?;
    write_tensor(&a.out.join("y.dnt"), &data.clean)?;
    write_model(&a.out.join("truth"), &data.truth)?;
    log::info!("noise scale {:e}, {} observed entries", data.sigma, data.mask.observed_count());
    Ok(EXIT_OK)
}

fn factorize(a: FactorizeArgs) -> Outcome {
    let (x, w) = read_data(&a.x, &a.w)?;
    let alpha = expand_alpha(&a.alpha, x.dims().len())?;
    let penalized: Vec<bool> = alpha.iter().map(|&v| v > 0.0).collect();
    let cfg = solver_config(a.rank, penalty(alpha, &penalized, &a.solver), &a.solver);
    let (model, report) = fit(&x, &w, &cfg, &a.solver)?;
    write_model(&a.out, &model)?;
    write_report(&a.out.join("fit_report.csv"), &fit_report_csv(&report)?)?;
    Ok(EXIT_OK)
}

fn complete(a: CompleteArgs) -> Outcome {
    let image = read_image_ppm(&a.image)?;
    let w = make_mask(image.shape(), &a.mask.clone().with_seed(a.solver.seed))?;
    let penalized = [true, true, false];
    let grid = a.alpha.clone();
    let alpha = if grid.len() > 1 {
        let base = solver_config(a.rank, penalty(vec![0.0; 3], &penalized, &a.solver), &a.solver);
        let cfg = CvConfig {
            folds: a.folds,
            seed: a.solver.seed,
            solver: solver_kind(a.solver.solver),
            base,
            convention: CvConvention::Standard,
        };
        let result = run_cv(&image, &w, &grid, &cfg)?;
        create_dir(&a.out)?;
        write_report(&a.out.join("cv.csv"), &cv_result_csv(&result)?)?;
        result.selected_alpha
    } else {
        grid[0]
    };
    let cfg = solver_config(a.rank, penalty(vec![alpha, alpha, 0.0], &penalized, &a.solver), &a.solver);
    let (model, report) = fit(&image, &w, &cfg, &a.solver)?;
    let completed = model.reconstruct();
    create_dir(&a.out)?;
    write_image_ppm(&a.out.join("completed.ppm"), &completed)?;
    write_report(&a.out.join("fit_report.csv"), &fit_report_csv(&report)?)?;

    let params = SsimParams::default();
    let mut rows = vec![("overall".to_string(), vec![psnr(&image, &completed, 255.0)?, ssim(&image, &completed, &params)?])];
    let missing: Vec<bool> = (0..image.values().len()).map(|i| !w.is_observed(i)).collect();
    if missing.iter().any(|&m| m) {
        rows.push((
            "missing".to_string(),
            vec![
                psnr_masked(&image, &completed, &missing, 255.0)?,
                ssim_masked(&image, &completed, &missing, &params)?,
            ],
        ));
    }
    let quality = table_csv(&["scope", "psnr", "ssim"], &rows)?;
    write_report(&a.out.join("quality.csv"), &quality)?;
    println!("alpha = {alpha}");
    for (scope, v) in &rows {
        println!("{scope}: PSNR {:.4} dB, SSIM {:.6}", v[0], v[1]);
    }
    Ok(EXIT_OK)
}

fn cv(a: CvArgs) -> Outcome {
    let (x, w) = read_data(&a.x, &a.w)?;
    let order = x.dims().len();
    let penalized: Vec<bool> = match &a.modes {
        None => vec![true; order],
        Some(modes) => {
            if let Some(&bad) = modes.iter().find(|&&m| m == 0 || m > order) {
                return Err(Failure::Usage(format!("mode {bad} outside 1..={order}")));
            }
            (1..=order).map(|n| modes.contains(&n)).collect()
        }
    };
    let base = solver_config(a.rank, penalty(vec![0.0; order], &penalized, &a.solver), &a.solver);
    let cfg = CvConfig {
        folds: a.folds,
        seed: a.solver.seed,
        solver: solver_kind(a.solver.solver),
        base,
        convention: match a.convention {
            ConventionArg::Standard => CvConvention::Standard,
            ConventionArg::FitOnFold => CvConvention::FitOnFold,
        },
    };
    let result = run_cv(&x, &w, &a.grid, &cfg)?;
    log::info!("selected alpha {}", result.selected_alpha);
    emit(a.out.as_deref(), &cv_result_csv(&result)?)?;
    Ok(EXIT_OK)
}

fn check_coercivity(a: CheckArgs) -> Outcome {
    let w = WeightMask::new(read_tensor(&a.w)?)?;
    if a.alpha.len() != w.dims().len() {
        return Err(Failure::Usage(format!("expected {} alpha values, got {}", w.dims().len(), a.alpha.len())));
    }
    let verdict = coercivity_check(&w, &a.alpha)?;
    if verdict.coercive {
        println!("coercive");
        return Ok(EXIT_OK);
    }
    let witness = verdict.witness.unwrap_or_default();
    if witness.is_empty() {
        println!("not coercive: every entry is missing");
    } else {
        let parts: Vec<String> = witness.iter().map(|(n, j)| format!("mode {} index {}", n + 1, j + 1)).collect();
        println!("not coercive: fully missing cylinder at {}", parts.join(", "));
    }
    Ok(EXIT_NOT_COERCIVE)
}

fn metrics(a: MetricsArgs) -> Outcome {
    let truth = read_model(&a.truth)?;
    let estimate = read_model(&a.estimate)?;
    let rows = vec![
        ("nmse".to_string(), nmse(&truth.reconstruct(), &estimate.reconstruct())?),
        ("sim".to_string(), sim_score(&truth, &estimate)?),
    ];
    emit(a.out.as_deref(), &key_value_csv(["metric", "value"], &rows)?)?;
    Ok(EXIT_OK)
}
