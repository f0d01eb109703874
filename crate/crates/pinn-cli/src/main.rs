//! `pinn` command line: train Burgers-equation models, evaluate checkpoints
//! against the series solution, sample plot grids, time inference, and rank
//! error tables against published baseline methods.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 1 for
//! everything else (including training runs where every restart diverged).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pinn_core::report::{canonical_points, DEFAULT_COUNTS};
use pinn_core::training::TrainingError;
use pinn_core::{
    benchmark_inference, compare_with_baselines, emit_surfaces, run_experiment, ActivationKind,
    BaselineConstants, Case, ErrorTable, ExperimentConfig, MlpModel, ProblemSpec, ReportError,
};

#[derive(Parser)]
#[command(
    name = "pinn",
    version,
    about = "Physics-informed neural solvers for the viscous Burgers equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, loss record, error table, and manifest
    Train(TrainArgs),
    /// Evaluate a checkpoint at the published comparison points
    Evaluate(EvaluateArgs),
    /// Sample solution, error, cross-section, and gradient grids from a checkpoint
    Surfaces(SurfacesArgs),
    /// Time batched prediction and residual evaluation over growing point counts
    Benchmark(BenchmarkArgs),
    /// Rank an error table against published baseline methods
    Compare(CompareArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// JSON experiment config; missing fields fall back to defaults
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for run artifacts
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overrides the seed from the config
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the benchmark problem from the config (1 or 2)
    #[arg(long)]
    problem: Option<u8>,
    /// Overrides the training case from the config (A, B, or C)
    #[arg(long)]
    case: Option<Case>,
    /// Overrides the activation from the config
    #[arg(long, value_name = "NAME", value_parser = parse_activation)]
    activation: Option<ActivationKind>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model checkpoint written by `train`
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Benchmark problem the checkpoint was trained on (1 or 2)
    #[arg(long, default_value_t = 1)]
    problem: u8,
    /// Case label recorded in the table; inferred from the checkpoint when omitted
    #[arg(long)]
    case: Option<Case>,
    /// Directory for errors.csv and errors.json; prints only when omitted
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurfacesArgs {
    /// Model checkpoint written by `train`
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Benchmark problem the checkpoint was trained on (1 or 2)
    #[arg(long, default_value_t = 1)]
    problem: u8,
    /// Spatial grid spacing
    #[arg(long, default_value_t = 0.01)]
    dx: f64,
    /// Temporal grid spacing
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Directory for the six grid CSV files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Model checkpoint written by `train`
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Benchmark problem supplying the sampling domain (1 or 2)
    #[arg(long, default_value_t = 1)]
    problem: u8,
    /// Seed for the sampled evaluation points
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Directory for timing.csv; prints only when omitted
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// errors.csv or errors.json written by `train` or `evaluate`
    #[arg(long, value_name = "PATH")]
    errors: PathBuf,
    /// Directory for comparison.txt and comparison.json; prints only when omitted
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Surfaces(args) => cmd_surfaces(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &ReportError) -> u8 {
    match err {
        ReportError::Config { .. } => 2,
        ReportError::Training(TrainingError::InvalidConfig { .. }) => 2,
        _ => 1,
    }
}

fn parse_activation(text: &str) -> Result<ActivationKind, String> {
    ActivationKind::from_label(text).ok_or_else(|| {
        format!("unknown activation `{text}` (expected tanh, gelu, mish, swish, softplus, or tanhexp)")
    })
}

/// A config path that cannot be read is a usage problem, not a runtime one.
fn load_config_arg(path: &Path) -> Result<ExperimentConfig, ReportError> {
    match pinn_core::report::load_config(path) {
        Err(ReportError::Io(err)) => Err(ReportError::Config {
            field: "--config".to_string(),
            message: format!("{}: {err}", path.display()),
        }),
        other => other,
    }
}

fn load_checkpoint(path: &Path) -> Result<MlpModel, ReportError> {
    Ok(MlpModel::load(path)?)
}

fn problem_spec(problem: u8) -> Result<ProblemSpec, ReportError> {
    ExperimentConfig {
        problem,
        ..ExperimentConfig::default()
    }
    .problem_spec()
}

fn cmd_train(args: TrainArgs) -> Result<(), ReportError> {
    let mut cfg = match &args.config {
        Some(path) => load_config_arg(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(problem) = args.problem {
        cfg.problem = problem;
    }
    if let Some(case) = args.case {
        cfg.train.case = case;
    }
    if let Some(activation) = args.activation {
        cfg.train.activation = activation;
    }
    cfg.validate()?;

    let artifacts = match run_experiment(&cfg, &args.out) {
        Err(err @ ReportError::Training(TrainingError::AllRestartsDiverged { .. })) => {
            eprintln!(
                "loss histories for the diverged restarts are in {}",
                args.out.join("record.jsonl").display()
            );
            return Err(err);
        }
        other => other?,
    };

    let outcome = &artifacts.outcome;
    println!(
        "trained problem {} case {} ({}), kept restart {} of {}",
        cfg.problem,
        cfg.train.case,
        cfg.train.activation.label(),
        outcome.best_restart + 1,
        cfg.train.restarts
    );
    let loss = &outcome.final_loss;
    println!(
        "final loss {:.4e} (init {:.4e}, boundary {:.4e}, residual {:.4e}, symmetry {:.4e})",
        loss.total, loss.l_init, loss.l_bound, loss.l_res, loss.l_symm
    );
    println!(
        "mean |u - u_exact| {:.4e} over {} comparison points",
        artifacts.table.mean_abs_error(),
        artifacts.table.rows.len()
    );
    println!("artifacts in {}", artifacts.out_dir.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), ReportError> {
    let model = load_checkpoint(&args.checkpoint)?;
    let problem = problem_spec(args.problem)?;
    let case = args.case.unwrap_or(if model.adaptive { Case::C } else { Case::A });
    let points = canonical_points(problem.tag);
    let table = ErrorTable::evaluate(&model, &problem, case, &points)?;
    print!("{}", render_error_table(&table));
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("errors.csv"), table.to_csv())?;
        std::fs::write(out.join("errors.json"), table.to_json()?)?;
        println!("wrote {}", out.join("errors.csv").display());
    }
    Ok(())
}

fn render_error_table(table: &ErrorTable) -> String {
    let mut text = format!(
        "{} case {} ({})\n{:>6} {:>6} {:>11} {:>11} {:>11}\n",
        table.problem.label(),
        table.case_label,
        table.activation_label,
        "x",
        "t",
        "exact",
        "predicted",
        "|error|"
    );
    for row in &table.rows {
        text.push_str(&format!(
            "{:>6} {:>6} {:>11.6} {:>11.6} {:>11.4e}\n",
            row.x, row.t, row.exact, row.predicted, row.abs_error
        ));
    }
    if !table.rows.is_empty() {
        text.push_str(&format!(
            "mean |error| {:.4e}, max {:.4e}\n",
            table.mean_abs_error(),
            table.max_abs_error()
        ));
    }
    text
}

fn cmd_surfaces(args: SurfacesArgs) -> Result<(), ReportError> {
    let model = load_checkpoint(&args.checkpoint)?;
    let problem = problem_spec(args.problem)?;
    let artifacts = emit_surfaces(&model, &problem, args.dx, args.dt, &args.out)?;
    for path in [
        &artifacts.model_surface,
        &artifacts.oracle_surface,
        &artifacts.error_surface,
        &artifacts.cross_sections,
        &artifacts.model_gradient,
        &artifacts.oracle_gradient,
    ] {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), ReportError> {
    let model = load_checkpoint(&args.checkpoint)?;
    let problem = problem_spec(args.problem)?;
    let table = benchmark_inference(&model, &problem, &DEFAULT_COUNTS, args.seed)?;
    for row in &table.rows {
        println!(
            "{:>6} points: {:>9.3} ms ({:>7.1} ns/point)",
            row.points,
            row.seconds * 1e3,
            row.seconds * 1e9 / row.points as f64
        );
    }
    println!(
        "linear fit: {:.3e} s/point + {:.3e} s, r^2 = {:.4}",
        table.fit.slope, table.fit.intercept, table.fit.r_squared
    );
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let path = out.join("timing.csv");
        std::fs::write(&path, table.to_csv())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), ReportError> {
    let text = std::fs::read_to_string(&args.errors)?;
    let table = if args.errors.extension().is_some_and(|e| e == "json") {
        ErrorTable::from_json(&text)?
    } else {
        ErrorTable::from_csv(&text)?
    };
    let baselines = BaselineConstants::load()?;
    let report = compare_with_baselines(&table, &baselines);
    print!("{}", report.to_text());
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("comparison.txt"), report.to_text())?;
        std::fs::write(out.join("comparison.json"), report.to_json()?)?;
        println!("wrote {}", out.join("comparison.txt").display());
    }
    Ok(())
}
