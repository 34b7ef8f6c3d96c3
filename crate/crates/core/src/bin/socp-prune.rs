//! Command-line front end for ensemble pruning.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver did not reach optimality,
//! 4 I/O failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use socp_prune::conic::text::parse_program;
use socp_prune::io::{
    self, read_predictions, read_report, read_summary, render_report, write_predictions, IoError, ReportFormat,
};
use socp_prune::pipeline::{
    cross_validate, fit_weights, generate_synthetic_ensemble, run_on_dataset, Anchor, Dataset, FitOptions, LambdaScale,
    PipelineError, PruneConfig, SyntheticSpec, ThresholdRule, VoteMode,
};
use socp_prune::solver::{solve_traced, SolverError, SolverSettings};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "socp-prune",
    version,
    about = "Sparse ensemble pruning by second-order cone programming"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for synthetic data; recorded in reports.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Comma-separated alpha values.
    #[arg(long, global = true, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Comma-separated lambda values.
    #[arg(long, global = true, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Fixed pruning threshold.
    #[arg(long, global = true, conflicts_with = "auto_threshold")]
    threshold: Option<f64>,
    /// Choose the threshold on the validation split (the default).
    #[arg(long, global = true)]
    auto_threshold: bool,
    #[arg(long, global = true, value_enum, default_value_t = Vote::Majority)]
    vote: Vote,
    /// Constrain weights to the probability simplex.
    #[arg(long, global = true)]
    simplex: bool,
    /// Treat lambda values as absolute L1 coefficients instead of fractions of lambda_max.
    #[arg(long, global = true)]
    absolute_lambda: bool,
    /// Solver tolerance (gap and residuals).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Output path; stdout when absent. For `gen`, the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long, global = true, default_value = "json")]
    format: ReportFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum Vote {
    Majority,
    Weighted,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic prediction set.
    Gen(GenArgs),
    /// Fit weights for a single (alpha, lambda).
    Fit(DataArgs),
    /// Grid search over (alpha, lambda).
    Cv(DataArgs),
    /// Prune at a single (alpha, lambda) and report.
    Prune(DataArgs),
    /// Full procedure: grid search, threshold, vote, report.
    Run(DataArgs),
    /// Validate a prediction manifest, a JSON report or a CSV summary.
    Check { path: PathBuf },
    /// Solve a cone program written in the text format.
    Solve {
        program: PathBuf,
        /// Print per-iteration progress to stderr.
        #[arg(short, long)]
        verbose: bool,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    models: usize,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    classes: usize,
    #[arg(long, default_value_t = 0.55)]
    acc_low: f64,
    #[arg(long, default_value_t = 0.8)]
    acc_high: f64,
    #[arg(long, default_value_t = 0.3)]
    correlation: f64,
    #[arg(long, default_value_t = 1.0)]
    sharpness: f64,
}

#[derive(Args)]
struct DataArgs {
    /// Prediction manifest.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Solver(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e.root() {
            PipelineError::FitFailed { .. } | PipelineError::AllCellsFailed => CliError::Solver(msg),
            PipelineError::Io(IoError::Io { .. }) => CliError::Io(msg),
            _ => CliError::Invalid(msg),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(args) => generate(g, args),
        Command::Fit(args) => {
            let data = load(&args.data)?;
            let config = config(g, false)?;
            let (alpha, lambda) = single_cell(&config)?;
            let train = data.tensor.select_samples(&data.split.train);
            let ytrain = data.labels.select(&data.split.train);
            let options = FitOptions {
                simplex: config.simplex_mode,
                lambda_scale: config.lambda_scale,
                solver: config.solver.clone(),
            };
            let fit = fit_weights(&train, &ytrain, alpha, lambda, &Anchor::Uniform, None, &options)?;
            emit(g, &json(&fit))?;
            Ok(0)
        }
        Command::Cv(args) => {
            let data = load(&args.data)?;
            let config = config(g, true)?;
            config.validate()?;
            let cv = cross_validate(&data.tensor, &data.labels, &data.split, &config)?;
            emit(g, &json(&cv))?;
            Ok(0)
        }
        Command::Prune(args) => {
            let data = load(&args.data)?;
            let mut config = config(g, false)?;
            let (alpha, lambda) = single_cell(&config)?;
            config.alpha_grid = vec![alpha];
            config.lambda_grid = vec![lambda];
            let report = run_on_dataset(&data, &config)?;
            emit(g, &render_report(&report, g.format))?;
            Ok(0)
        }
        Command::Run(args) => {
            let data = load(&args.data)?;
            let report = run_on_dataset(&data, &config(g, true)?)?;
            emit(g, &render_report(&report, g.format))?;
            Ok(0)
        }
        Command::Check { path } => check(g, path),
        Command::Solve { program, verbose } => {
            let text =
                std::fs::read_to_string(program).map_err(|e| CliError::Io(format!("{}: {e}", program.display())))?;
            let p = parse_program(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", program.display())))?;
            let settings = solver_settings(g);
            let sol = if *verbose {
                solve_traced(&p, &settings, &mut std::io::stderr())?
            } else {
                solve_traced(&p, &settings, &mut std::io::sink())?
            };
            emit(g, &json(&sol))?;
            Ok(if sol.status == socp_prune::SolveStatus::Optimal {
                0
            } else {
                3
            })
        }
    }
}

fn generate(g: &Global, args: &GenArgs) -> Result<u8, CliError> {
    let dir = g
        .out
        .as_deref()
        .ok_or_else(|| CliError::Invalid("gen needs --out DIR".into()))?;
    let spec = SyntheticSpec {
        num_models: args.models,
        num_samples: args.samples,
        num_classes: args.classes,
        accuracy_range: (args.acc_low, args.acc_high),
        correlation: args.correlation,
        sharpness: args.sharpness,
        seed: g.seed,
    };
    let e = generate_synthetic_ensemble(&spec)?;
    std::fs::create_dir_all(dir).map_err(|err| CliError::Io(format!("{}: {err}", dir.display())))?;
    let provenance = format!(
        "synthetic: models={} samples={} classes={} accuracy=[{}, {}] correlation={} sharpness={} seed={}",
        spec.num_models,
        spec.num_samples,
        spec.num_classes,
        args.acc_low,
        args.acc_high,
        spec.correlation,
        spec.sharpness,
        spec.seed
    );
    let files = write_predictions(dir, &e.tensor, &e.labels, &e.split, &provenance)?;
    println!("{}", files.manifest.display());
    Ok(0)
}

fn check(g: &Global, path: &Path) -> Result<u8, CliError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let line = match ext {
        "json" => {
            let r = read_report(path)?;
            format!(
                "report ok: {} of {} models kept, accuracy {} -> {}",
                r.num_models_pruned, r.num_models_full, r.full_accuracy, r.pruned_accuracy
            )
        }
        "csv" => {
            let s = read_summary(path)?;
            format!("summary ok: {} of {} models kept", s.models_pruned, s.models_full)
        }
        _ => {
            let (t, _, split) = read_predictions(path)?;
            format!(
                "predictions ok: {} models, {} samples, {} classes; split {}/{}/{}",
                t.num_models(),
                t.num_samples(),
                t.num_classes(),
                split.train.len(),
                split.valid.len(),
                split.test.len()
            )
        }
    };
    emit(g, &format!("{line}\n"))?;
    Ok(0)
}

fn load(path: &Path) -> Result<Dataset, CliError> {
    let (tensor, labels, split) = read_predictions(path)?;
    Ok(Dataset::new(tensor, labels, split)?)
}

fn solver_settings(g: &Global) -> SolverSettings {
    let mut s = g
        .tol
        .map_or_else(SolverSettings::default, SolverSettings::with_tolerance);
    if let Some(n) = g.max_iters {
        s.max_iters = n;
    }
    s
}

fn config(g: &Global, grid: bool) -> Result<PruneConfig, CliError> {
    let mut c = PruneConfig {
        seed: g.seed,
        simplex_mode: g.simplex,
        vote: match g.vote {
            Vote::Majority => VoteMode::Majority,
            Vote::Weighted => VoteMode::Weighted,
        },
        lambda_scale: if g.absolute_lambda {
            LambdaScale::Absolute
        } else {
            LambdaScale::Relative
        },
        threshold: match g.threshold {
            Some(h) => ThresholdRule::Fixed(h),
            None => ThresholdRule::Auto,
        },
        solver: solver_settings(g),
        ..PruneConfig::default()
    };
    if !g.alpha.is_empty() {
        c.alpha_grid = g.alpha.clone();
    }
    if !g.lambda.is_empty() {
        c.lambda_grid = g.lambda.clone();
    }
    if !grid && (g.alpha.len() != 1 || g.lambda.len() != 1) {
        return Err(CliError::Invalid(
            "this command needs exactly one --alpha and one --lambda".into(),
        ));
    }
    c.validate()?;
    Ok(c)
}

fn single_cell(c: &PruneConfig) -> Result<(f64, f64), CliError> {
    match (c.alpha_grid.as_slice(), c.lambda_grid.as_slice()) {
        ([a], [l]) => Ok((*a, *l)),
        _ => Err(CliError::Invalid("expected a single alpha and lambda".into())),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn emit(g: &Global, text: &str) -> Result<(), CliError> {
    match &g.out {
        Some(path) => Ok(io::atomic_write(path, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
