use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{estimate_norm_seeded, NormEstimate, DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_REL_TOL};
use crate::mprgp::{solve, ExpansionStrategy, SolveReport, SolverConfig, StrategyKind};
use crate::qp::BoxQp;
use crate::smalbe::{solve_equality, SmalbeConfig};
use crate::svm::{augment_nobias, build_dual, initial_guess, LabeledDataset, Loss};

use super::generators::{generate_eq_toy, generate_obstacle};
use super::qpfile::read_qp;

/// The step-length grid of the benchmark tables.
pub const DEFAULT_ALPHA_GRID: [f64; 12] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 1.9, 1.95, 2.0];

/// Where the problem of a sweep comes from. Every run gets a freshly built
/// problem so operator counters start from zero.
#[derive(Debug, Clone)]
pub enum ProblemSource {
    QpFile(PathBuf),
    Svm {
        data: Arc<LabeledDataset>,
        loss: Loss,
        c: f64,
        beta: f64,
    },
    Obstacle {
        nx: usize,
        ny: usize,
        load: f64,
        obstacle: f64,
    },
    EqToy {
        n: usize,
        m: usize,
        seed: u64,
    },
}

/// A problem together with its starting point.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub problem: BoxQp,
    pub x0: Vec<f64>,
}

impl ProblemSource {
    pub fn instantiate(&self) -> Result<ProblemInstance> {
        let problem = match self {
            Self::QpFile(path) => read_qp(path)?,
            Self::Svm { data, loss, c, beta } => {
                let augmented = augment_nobias(data, *beta)?;
                let problem = build_dual(&augmented, *loss, *c)?;
                let x0 = initial_guess(*loss, *c, problem.dim());
                return Ok(ProblemInstance { problem, x0 });
            }
            Self::Obstacle {
                nx,
                ny,
                load,
                obstacle,
            } => generate_obstacle(*nx, *ny, *load, *obstacle)?,
            Self::EqToy { n, m, seed } => generate_eq_toy(*n, *m, *seed)?,
        };
        let x0 = problem.project(&vec![0.0; problem.dim()]);
        Ok(ProblemInstance { problem, x0 })
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Benchmark id written into every row.
    pub benchmark: String,
    pub source: ProblemSource,
    pub strategies: Vec<ExpansionStrategy>,
    pub alpha_grid: Vec<f64>,
    pub gamma: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_hessian_mults: u64,
    /// Seed of the power-iteration start vector.
    pub seed: u64,
}

impl SweepSpec {
    /// The table strategies on the default grid with `Gamma = 1`.
    pub fn new(benchmark: impl Into<String>, source: ProblemSource, rtol: f64) -> Self {
        Self {
            benchmark: benchmark.into(),
            source,
            strategies: crate::mprgp::table_strategies(),
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            gamma: 1.0,
            rtol,
            atol: 0.0,
            max_hessian_mults: 100_000,
            seed: 0,
        }
    }

    /// `(strategy, alpha_u)` pairs in output order: strategies as listed, each
    /// over the ascending grid; projcg once.
    pub fn points(&self) -> Result<Vec<(ExpansionStrategy, Option<f64>)>> {
        if self.strategies.is_empty() {
            return Err(Error::InvalidParameter {
                name: "strategies",
                reason: "at least one strategy is required".into(),
            });
        }
        let mut grid = self.alpha_grid.clone();
        if let Some(bad) = grid.iter().find(|a| !(**a > 0.0 && **a <= 2.0)) {
            return Err(Error::InvalidParameter {
                name: "alpha_grid",
                reason: format!("values must lie in (0, 2], got {bad}"),
            });
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let mut points = Vec::new();
        for s in &self.strategies {
            if s.uses_alpha_u() {
                points.extend(grid.iter().map(|a| (s.with_alpha_u(*a), Some(*a))));
            } else {
                points.push((*s, None));
            }
        }
        Ok(points)
    }
}

/// One line of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub benchmark: String,
    pub strategy: String,
    pub alpha_u: Option<f64>,
    pub outer_iterations: u64,
    pub hessian_mults: u64,
    pub cg_steps: u64,
    pub expansion_steps: u64,
    pub proportioning_steps: u64,
    pub converged: bool,
    pub projected_gradient_norm: f64,
}

impl SweepRow {
    /// Row for a finished run; `alpha_u` is taken from the strategy.
    pub fn from_report(
        benchmark: impl Into<String>,
        strategy: &ExpansionStrategy,
        report: &SolveReport,
    ) -> Self {
        Self {
            benchmark: benchmark.into(),
            strategy: strategy.name(),
            alpha_u: strategy.uses_alpha_u().then_some(strategy.alpha_u),
            outer_iterations: report.outer_iterations,
            hessian_mults: report.hessian_mults,
            cg_steps: report.cg_steps,
            expansion_steps: report.expansion_steps,
            proportioning_steps: report.proportioning_steps,
            converged: report.converged,
            projected_gradient_norm: report.projected_gradient_norm,
        }
    }
}

/// Counters behind a row that the table does not show.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDetail {
    pub kind: StrategyKind,
    pub setup_mults: u64,
    pub half_step_expansions: u64,
    /// Set when the run failed; the row then reports `converged = false`.
    pub error: Option<String>,
}

impl RunDetail {
    /// Applications one line-search-complete expansion of this run costs.
    pub fn expansion_cost(&self) -> u64 {
        match self.kind {
            StrategyKind::Opt => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub details: Vec<RunDetail>,
    /// Shared `||A||` estimate; its applications are not part of any row.
    pub norm: NormEstimate,
}

impl SweepOutcome {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

fn run_point(spec: &SweepSpec, strategy: ExpansionStrategy, norm: f64) -> Result<SolveReport> {
    let instance = spec.source.instantiate()?;
    let config = SolverConfig {
        gamma: spec.gamma,
        rtol: spec.rtol,
        atol: spec.atol,
        max_hessian_mults: spec.max_hessian_mults,
        strategy,
        norm_a: Some(norm),
    };
    match instance.problem.equality() {
        Some(eq) if !eq.rhs.is_empty() => {
            let cfg = SmalbeConfig::from_norm(norm, config).with_outer_rtol(spec.rtol);
            Ok(solve_equality(&instance.problem, &instance.x0, &cfg)?.report)
        }
        _ => solve(&instance.problem, &instance.x0, &config),
    }
}

/// Runs every `(strategy, alpha_u)` point of the spec in parallel.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    let points = spec.points()?;
    let probe = spec.source.instantiate()?;
    let norm = estimate_norm_seeded(
        probe.problem.operator().as_ref(),
        DEFAULT_NORM_MAX_ITERS,
        DEFAULT_NORM_REL_TOL,
        spec.seed,
    )?;
    let results: Vec<(SweepRow, RunDetail)> = points
        .par_iter()
        .map(|(strategy, alpha)| {
            let outcome = run_point(spec, *strategy, norm.value);
            let mut detail = RunDetail {
                kind: strategy.kind,
                setup_mults: 0,
                half_step_expansions: 0,
                error: None,
            };
            let row = match outcome {
                Ok(r) => {
                    detail.setup_mults = r.setup_mults;
                    detail.half_step_expansions = r.half_step_expansions;
                    SweepRow::from_report(spec.benchmark.clone(), strategy, &r)
                }
                Err(e) => {
                    detail.error = Some(e.to_string());
                    SweepRow {
                        benchmark: spec.benchmark.clone(),
                        strategy: strategy.name(),
                        alpha_u: *alpha,
                        outer_iterations: 0,
                        hessian_mults: 0,
                        cg_steps: 0,
                        expansion_steps: 0,
                        proportioning_steps: 0,
                        converged: false,
                        projected_gradient_norm: f64::NAN,
                    }
                }
            };
            (row, detail)
        })
        .collect();
    let (rows, details) = results.into_iter().unzip();
    Ok(SweepOutcome {
        rows,
        details,
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

/// Renders rows as CSV or as markdown tables, one table per benchmark.
pub fn emit(rows: &[SweepRow], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if rows.is_empty() {
                w.write_record(CSV_HEADER.split(','))?;
            }
            for row in rows {
                w.serialize(row)?;
            }
            let bytes = w.into_inner().map_err(|e| e.into_error())?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Markdown => Ok(markdown(rows)),
    }
}

pub const CSV_HEADER: &str = "benchmark,strategy,alpha_u,outer_iterations,hessian_mults,cg_steps,expansion_steps,proportioning_steps,converged,projected_gradient_norm";

fn markdown(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let mut current: Option<&str> = None;
    for row in rows {
        if current != Some(row.benchmark.as_str()) {
            if current.is_some() {
                out.push('\n');
            }
            current = Some(&row.benchmark);
            let _ = writeln!(out, "### {}\n", row.benchmark);
            out.push_str("| strategy | alpha_u | outer it. | #Hess. mult. | #CG | #Exp. | #Prop. | converged | norm g^P |\n");
            out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        }
        let alpha = row.alpha_u.map_or_else(|| "-".to_string(), |a| a.to_string());
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {:.3e} |",
            row.strategy,
            alpha,
            row.outer_iterations,
            row.hessian_mults,
            row.cg_steps,
            row.expansion_steps,
            row.proportioning_steps,
            if row.converged { "yes" } else { "no" },
            row.projected_gradient_norm
        );
    }
    out
}

/// Reads rows written by [`emit`] with [`Format::Csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!("unexpected header `{}`", header.join(",")),
        });
    }
    Ok(r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}
