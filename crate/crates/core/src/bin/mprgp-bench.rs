//! Command-line harness: single solves, strategy sweeps and norm estimates.
//!
//! Exit status is 0 when every run converged, 1 when some run did not and 2
//! on input errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mprgp::bench::{
    emit, generate_eq_toy, generate_obstacle, read_qp, run_sweep, write_qp, Format, ProblemSource,
    SweepRow, SweepSpec, DEFAULT_ALPHA_GRID,
};
use mprgp::linop::{estimate_norm_seeded, DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_REL_TOL};
use mprgp::mprgp::{parse_strategy, table_strategies};
use mprgp::smalbe::{solve_equality, SmalbeConfig};
use mprgp::svm::{accuracy, augment_nobias, build_dual, read_libsvm, train, Loss};
use mprgp::{BoxQp, ExpansionStrategy, SolveReport, SolverConfig};

#[derive(Parser)]
#[command(name = "mprgp-bench", version, about = "MPRGP solver and expansion-strategy benchmarks")]
struct Cli {
    /// Seed for every random choice (norm-estimate start vector, generated problems).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a QP stored as JSON; equality rows go through the augmented Lagrangian loop.
    Solve(SolveArgs),
    /// Train a linear no-bias SVM on a LIBSVM file, or sweep the expansion strategies.
    Svm(SvmArgs),
    /// Obstacle problem on the unit square.
    Obstacle(ObstacleArgs),
    /// Random QP with equality constraints solved by the augmented Lagrangian loop.
    EqToy(EqToyArgs),
    /// Power-iteration estimate of the Hessian norm.
    Norm(NormArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Markdown,
    Json,
}

#[derive(Args)]
struct SolverArgs {
    /// Expansion strategy, e.g. fixed, gfgf-opt, grgr-optapprox, projcg.
    #[arg(long, default_value = "fixed")]
    strategy: String,
    #[arg(long = "alpha-u", default_value_t = 1.9)]
    alpha_u: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Stop at ||g^P|| <= max(rtol ||b||, atol).
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    atol: f64,
    /// Budget of Hessian multiplications per run.
    #[arg(long = "max-hess", default_value_t = 100_000)]
    max_hess: u64,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Run every strategy over the alpha_u grid.
    #[arg(long)]
    sweep: bool,
    /// Comma-separated strategies for --sweep; defaults to the full table set.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,
    /// Comma-separated alpha_u grid for --sweep.
    #[arg(long = "alpha-grid", value_delimiter = ',')]
    alpha_grid: Vec<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SvmArgs {
    /// LIBSVM text file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "l1")]
    loss: LossArg,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Write the trained model as JSON (single runs only).
    #[arg(long = "model-out")]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    sweep: SweepArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    L1,
    L2,
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::L1 => Loss::L1,
            LossArg::L2 => Loss::L2,
        }
    }
}

#[derive(Args)]
struct ObstacleArgs {
    /// Cells in x; the grid has (nx - 1)(ny - 1) unknowns.
    #[arg(long, default_value_t = 32)]
    nx: usize,
    #[arg(long, default_value_t = 32)]
    ny: usize,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    load: f64,
    /// Height of the obstacle; "-inf" removes it.
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    obstacle: f64,
    #[command(flatten)]
    sweep: SweepArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EqToyArgs {
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Also write the generated problem as QP JSON.
    #[arg(long = "write-problem")]
    write_problem: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct NormArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long = "max-iters", default_value_t = DEFAULT_NORM_MAX_ITERS)]
    max_iters: usize,
    #[arg(long = "rel-tol", default_value_t = DEFAULT_NORM_REL_TOL)]
    rel_tol: f64,
}

/// Failures that map to exit status 2.
struct InputError(String);

impl From<mprgp::Error> for InputError {
    fn from(e: mprgp::Error) -> Self {
        Self(e.to_string())
    }
}

impl From<std::io::Error> for InputError {
    fn from(e: std::io::Error) -> Self {
        Self(e.to_string())
    }
}

impl From<serde_json::Error> for InputError {
    fn from(e: serde_json::Error) -> Self {
        Self(e.to_string())
    }
}

type CmdResult = Result<bool, InputError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed;
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a, seed),
        Command::Svm(a) => cmd_svm(a, seed),
        Command::Obstacle(a) => cmd_obstacle(a, seed),
        Command::EqToy(a) => cmd_eq_toy(a, seed),
        Command::Norm(a) => cmd_norm(a, seed),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

impl SolverArgs {
    fn strategy(&self) -> Result<ExpansionStrategy, InputError> {
        let s = parse_strategy(&self.strategy)?.with_alpha_u(self.alpha_u);
        s.validate()?;
        Ok(s)
    }

    fn config(&self, default_rtol: f64, norm: Option<f64>) -> Result<SolverConfig, InputError> {
        let config = SolverConfig {
            gamma: self.gamma,
            rtol: self.rtol.unwrap_or(default_rtol),
            atol: self.atol,
            max_hessian_mults: self.max_hess,
            strategy: self.strategy()?,
            norm_a: norm,
        };
        config.validate()?;
        Ok(config)
    }
}

impl SweepArgs {
    fn spec(
        &self,
        benchmark: String,
        source: ProblemSource,
        solver: &SolverArgs,
        default_rtol: f64,
        seed: u64,
    ) -> Result<SweepSpec, InputError> {
        let mut spec = SweepSpec::new(benchmark, source, solver.rtol.unwrap_or(default_rtol));
        if !self.strategies.is_empty() {
            spec.strategies = self
                .strategies
                .iter()
                .map(|s| parse_strategy(s.trim()))
                .collect::<mprgp::Result<_>>()?;
        } else {
            spec.strategies = table_strategies();
        }
        spec.alpha_grid = if self.alpha_grid.is_empty() {
            DEFAULT_ALPHA_GRID.to_vec()
        } else {
            self.alpha_grid.clone()
        };
        spec.gamma = solver.gamma;
        spec.atol = solver.atol;
        spec.max_hessian_mults = solver.max_hess;
        spec.seed = seed;
        spec.points()?;
        Ok(spec)
    }
}

fn write_output(text: &str, output: &OutputArgs) -> Result<(), InputError> {
    match &output.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn render_rows(rows: &[SweepRow], format: OutputFormat) -> Result<String, InputError> {
    Ok(match format {
        OutputFormat::Csv => emit(rows, Format::Csv)?,
        OutputFormat::Markdown => emit(rows, Format::Markdown)?,
        OutputFormat::Json => serde_json::to_string_pretty(rows)? + "\n",
    })
}

fn norm_of(problem: &BoxQp, seed: u64) -> Result<f64, InputError> {
    let op = problem.operator();
    Ok(estimate_norm_seeded(op.as_ref(), DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_REL_TOL, seed)?.value)
}

/// Solves with MPRGP, or with the augmented Lagrangian loop when `Gx = e` is present.
fn solve_any(
    problem: &BoxQp,
    x0: &[f64],
    config: &SolverConfig,
) -> Result<(SolveReport, Option<SmalbeExtra>), InputError> {
    match problem.equality() {
        Some(eq) if !eq.rhs.is_empty() => {
            let norm = config.norm_a.expect("norm is estimated before equality solves");
            let cfg = SmalbeConfig::from_norm(norm, *config).with_outer_rtol(config.rtol);
            let r = solve_equality(problem, x0, &cfg)?;
            let extra = SmalbeExtra {
                multipliers: r.multipliers,
                feasibility_norm: r.feasibility_norm,
                penalty: r.penalty,
            };
            Ok((r.report, Some(extra)))
        }
        _ => Ok((mprgp::solve(problem, x0, config)?, None)),
    }
}

#[derive(Serialize)]
struct SmalbeExtra {
    multipliers: Vec<f64>,
    feasibility_norm: f64,
    penalty: f64,
}

#[derive(Serialize)]
struct SingleRun<'a> {
    benchmark: &'a str,
    strategy: String,
    #[serde(flatten)]
    report: &'a SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    equality: Option<&'a SmalbeExtra>,
}

fn report_single(
    benchmark: &str,
    config: &SolverConfig,
    report: &SolveReport,
    extra: Option<&SmalbeExtra>,
    output: &OutputArgs,
) -> CmdResult {
    let text = match output.format {
        OutputFormat::Json => {
            let run = SingleRun {
                benchmark,
                strategy: config.strategy.name(),
                report,
                equality: extra,
            };
            serde_json::to_string_pretty(&run)? + "\n"
        }
        format => render_rows(
            &[SweepRow::from_report(benchmark, &config.strategy, report)],
            format,
        )?,
    };
    write_output(&text, output)?;
    Ok(report.converged)
}

fn report_sweep(spec: &SweepSpec, output: &OutputArgs) -> CmdResult {
    let outcome = run_sweep(spec)?;
    for (row, detail) in outcome.rows.iter().zip(&outcome.details) {
        if let Some(err) = &detail.error {
            eprintln!("{} {:?}: {err}", row.strategy, row.alpha_u);
        }
    }
    eprintln!(
        "norm estimate {:.6e} from {} multiplications (not included in the rows)",
        outcome.norm.value, outcome.norm.mults_spent
    );
    write_output(&render_rows(&outcome.rows, output.format)?, output)?;
    Ok(outcome.all_converged())
}

fn cmd_solve(a: SolveArgs, seed: u64) -> CmdResult {
    let problem = read_qp(&a.problem)?;
    let norm = norm_of(&problem, seed)?;
    let config = a.solver.config(1e-6, Some(norm))?;
    let x0 = problem.project(&vec![0.0; problem.dim()]);
    let (report, extra) = solve_any(&problem, &x0, &config)?;
    let name = a.problem.display().to_string();
    report_single(&name, &config, &report, extra.as_ref(), &a.output)
}

fn cmd_svm(a: SvmArgs, seed: u64) -> CmdResult {
    let data = read_libsvm(&a.data, None)?;
    let benchmark = a
        .data
        .file_stem()
        .map_or_else(|| "svm".to_string(), |s| s.to_string_lossy().into_owned());
    let loss = Loss::from(a.loss);
    if a.sweep.sweep {
        let source = ProblemSource::Svm {
            data: Arc::new(data),
            loss,
            c: a.c,
            beta: a.beta,
        };
        let spec = a.sweep.spec(benchmark, source, &a.solver, 0.1, seed)?;
        return report_sweep(&spec, &a.output);
    }
    let augmented = augment_nobias(&data, a.beta)?;
    let dual = build_dual(&augmented, loss, a.c)?;
    let norm = norm_of(&dual, seed)?;
    let config = a.solver.config(0.1, Some(norm))?;
    let (model, report) = train(&data, loss, a.c, a.beta, &config)?;
    eprintln!(
        "training accuracy {:.4} on {} samples",
        accuracy(&model, &data)?,
        data.sample_count()
    );
    if let Some(path) = &a.model_out {
        fs::write(path, model.to_json()?)?;
    }
    report_single(&benchmark, &config, &report, None, &a.output)
}

fn cmd_obstacle(a: ObstacleArgs, seed: u64) -> CmdResult {
    let benchmark = format!("obstacle-{}x{}", a.nx, a.ny);
    if a.sweep.sweep {
        let source = ProblemSource::Obstacle {
            nx: a.nx,
            ny: a.ny,
            load: a.load,
            obstacle: a.obstacle,
        };
        let spec = a.sweep.spec(benchmark, source, &a.solver, 1e-6, seed)?;
        return report_sweep(&spec, &a.output);
    }
    let problem = generate_obstacle(a.nx, a.ny, a.load, a.obstacle)?;
    let norm = norm_of(&problem, seed)?;
    let config = a.solver.config(1e-6, Some(norm))?;
    let x0 = problem.project(&vec![0.0; problem.dim()]);
    let report = mprgp::solve(&problem, &x0, &config)?;
    let contact = report.x.iter().filter(|v| **v == a.obstacle).count();
    eprintln!("{contact} of {} nodes touch the obstacle", problem.dim());
    report_single(&benchmark, &config, &report, None, &a.output)
}

fn cmd_eq_toy(a: EqToyArgs, seed: u64) -> CmdResult {
    let problem = generate_eq_toy(a.n, a.m, seed)?;
    if let Some(path) = &a.write_problem {
        fs::write(path, write_qp(&problem)?)?;
    }
    let norm = norm_of(&problem, seed)?;
    let config = a.solver.config(1e-6, Some(norm))?;
    let x0 = problem.project(&vec![0.0; problem.dim()]);
    let (report, extra) = solve_any(&problem, &x0, &config)?;
    if let Some(e) = &extra {
        eprintln!(
            "||Gx - e|| = {:.3e} after {} outer iterations, penalty {:.3e}",
            e.feasibility_norm, report.outer_iterations, e.penalty
        );
    }
    let benchmark = format!("eq-toy-n{}-m{}-s{}", a.n, a.m, seed);
    report_single(&benchmark, &config, &report, extra.as_ref(), &a.output)
}

fn cmd_norm(a: NormArgs, seed: u64) -> CmdResult {
    let problem = read_qp(&a.problem)?;
    let op = problem.operator();
    let est = estimate_norm_seeded(op.as_ref(), a.max_iters, a.rel_tol, seed)?;
    println!(
        "norm {:.12e} iterations {} hessian_mults {}",
        est.value, est.iterations, est.mults_spent
    );
    Ok(true)
}
