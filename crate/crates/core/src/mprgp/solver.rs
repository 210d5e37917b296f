use serde::Serialize;

use crate::error::{Error, Result};
use crate::linop::{dot, estimate_norm, DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_REL_TOL};
use crate::qp::{clamp, reduced_component, split_component, BoxQp};

use super::strategy::{ExpansionStrategy, SplitVector, StrategyKind};

/// Parameters of one MPRGP run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Proportioning parameter `Gamma`.
    pub gamma: f64,
    /// Stop when `||g^P|| <= rtol * ||b||` ...
    pub rtol: f64,
    /// ... or `||g^P|| <= atol`, whichever is larger.
    pub atol: f64,
    /// Budget in operator applications, setup included.
    pub max_hessian_mults: u64,
    pub strategy: ExpansionStrategy,
    /// `||A||`; estimated by power iteration when needed and absent.
    pub norm_a: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            rtol: 1e-6,
            atol: 0.0,
            max_hessian_mults: 100_000,
            strategy: ExpansionStrategy::projcg(),
            norm_a: None,
        }
    }
}

impl SolverConfig {
    pub fn with_strategy(mut self, strategy: ExpansionStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_norm(mut self, norm_a: f64) -> Self {
        self.norm_a = Some(norm_a);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", "must be positive and finite");
        }
        if !(self.rtol >= 0.0 && self.atol >= 0.0) || !(self.rtol > 0.0 || self.atol > 0.0) {
            return bad("rtol/atol", "must be nonnegative with at least one positive");
        }
        if self.max_hessian_mults == 0 {
            return bad("max_hessian_mults", "must be at least 1");
        }
        if let Some(n) = self.norm_a {
            if !(n > 0.0 && n.is_finite()) {
                return bad("norm_a", "must be positive and finite");
            }
        }
        self.strategy.validate()
    }
}

/// Kind of a completed step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepKind {
    Cg,
    /// `line_search` is false when the free gradient vanished at the half
    /// step, so the step ended there.
    Expansion {
        strategy: StrategyKind,
        line_search: bool,
    },
    Proportioning,
}

impl StepKind {
    /// Operator applications a step of this kind costs.
    pub fn hessian_mults(&self) -> u64 {
        match self {
            Self::Cg | Self::Proportioning => 1,
            Self::Expansion {
                line_search: false, ..
            } => 1,
            Self::Expansion {
                strategy: StrategyKind::Opt,
                ..
            } => 3,
            Self::Expansion { .. } => 2,
        }
    }
}

/// State at the half step of a line-search expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTrace {
    pub alpha_cg: f64,
    pub alpha_f: f64,
    pub x_half: Vec<f64>,
    pub g_half: Vec<f64>,
    pub free_half: Vec<f64>,
    /// Absent when the run has no reference step (no norm available).
    pub reduced_half: Option<Vec<f64>>,
    /// `alpha_u / ||A||`.
    pub reference_step: Option<f64>,
    /// Line-search step length; absent when the line search was skipped.
    pub step_length: Option<f64>,
}

/// Passed to the observer after every step.
#[derive(Debug)]
pub struct StepEvent<'a> {
    /// Zero-based step index.
    pub iteration: usize,
    pub kind: StepKind,
    /// Operator applications spent by this step.
    pub hessian_mults: u64,
    pub x_before: &'a [f64],
    pub x: &'a [f64],
    pub g: &'a [f64],
    pub projected_gradient_norm: f64,
    pub expansion: Option<&'a ExpansionTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub converged: bool,
    pub projected_gradient_norm: f64,
    /// Operator applications of the run, including `setup_mults`.
    pub hessian_mults: u64,
    pub setup_mults: u64,
    /// Applications spent estimating `||A||` inside this call (not in `hessian_mults`).
    pub norm_mults: u64,
    pub cg_steps: u64,
    pub expansion_steps: u64,
    /// Expansions that stopped at the half step; included in `expansion_steps`.
    pub half_step_expansions: u64,
    pub proportioning_steps: u64,
    pub outer_iterations: u64,
    pub dot_products: u64,
    pub vector_updates: u64,
    pub gradient_splittings: u64,
    pub final_cost: f64,
}

impl SolveReport {
    pub fn iterations(&self) -> u64 {
        self.cg_steps + self.expansion_steps + self.proportioning_steps
    }
}

/// Largest `alpha >= 0` with `x - alpha p` inside `[lower, upper]`.
pub fn max_feasible_step(x: &[f64], p: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..x.len() {
        let step = exit_step(x[j], p[j], lower[j], upper[j]);
        if step < best {
            best = step;
        }
    }
    best
}

#[inline]
fn exit_step(x: f64, p: f64, l: f64, u: f64) -> f64 {
    if p > 0.0 {
        (x - l) / p
    } else if p < 0.0 {
        (x - u) / p
    } else {
        f64::INFINITY
    }
}

/// `x <- x - alpha p`, placing components whose exit step is reached exactly
/// on their bound.
fn step_feasible(x: &mut [f64], p: &[f64], alpha: f64, lower: &[f64], upper: &[f64]) {
    for j in 0..x.len() {
        let pj = p[j];
        if pj == 0.0 {
            continue;
        }
        if exit_step(x[j], pj, lower[j], upper[j]) <= alpha {
            x[j] = if pj > 0.0 { lower[j] } else { upper[j] };
        } else {
            x[j] = clamp(x[j] - alpha * pj, lower[j], upper[j]);
        }
    }
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves a box-constrained QP with MPRGP from the feasible start `x0`.
pub fn solve(problem: &BoxQp, x0: &[f64], config: &SolverConfig) -> Result<SolveReport> {
    Run::new(problem, x0, config, None)?.finish()
}

/// Convergence test replacing the tolerance of the config; receives the
/// iterate and `||g^P||`.
pub(crate) type StopRule<'r> = &'r dyn Fn(&[f64], f64) -> bool;

pub(crate) fn solve_until(
    problem: &BoxQp,
    x0: &[f64],
    config: &SolverConfig,
    rule: StopRule<'_>,
) -> Result<SolveReport> {
    let mut run = Run::new(problem, x0, config, None)?;
    run.rule = Some(rule);
    run.finish()
}

/// Like [`solve`], calling `observer` after every step.
pub fn solve_with_observer(
    problem: &BoxQp,
    x0: &[f64],
    config: &SolverConfig,
    mut observer: impl FnMut(&StepEvent),
) -> Result<SolveReport> {
    Run::new(problem, x0, config, Some(&mut observer))?.finish()
}

struct Run<'a> {
    problem: &'a BoxQp,
    config: &'a SolverConfig,
    observer: Option<&'a mut dyn FnMut(&StepEvent)>,
    rule: Option<StopRule<'a>>,
    reference_step: Option<f64>,
    tol: f64,
    start_mults: u64,
    norm_mults: u64,
    x: Vec<f64>,
    g: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    free: Vec<f64>,
    reduced: Vec<f64>,
    chopped: Vec<f64>,
    scratch: Vec<f64>,
    gf_sq: f64,
    gc_sq: f64,
    report: SolveReport,
}

impl<'a> Run<'a> {
    fn new(
        problem: &'a BoxQp,
        x0: &[f64],
        config: &'a SolverConfig,
        observer: Option<&'a mut dyn FnMut(&StepEvent)>,
    ) -> Result<Self> {
        config.validate()?;
        if problem.equality().is_some_and(|eq| !eq.rhs.is_empty()) {
            return Err(Error::InvalidParameter {
                name: "problem",
                reason: "equality constraints need the augmented Lagrangian driver".into(),
            });
        }
        problem.check_feasible(x0)?;
        let op = problem.operator();
        let strategy = config.strategy;
        let mut norm_mults = 0;
        let norm_a = match (config.norm_a, strategy.needs_norm()) {
            (Some(v), _) => Some(v),
            (None, true) => {
                let est = estimate_norm(op.as_ref(), DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_REL_TOL)?;
                norm_mults = est.mults_spent;
                Some(est.value)
            }
            (None, false) => None,
        };
        let reference_step = match strategy.kind {
            StrategyKind::ProjCg => None,
            _ => norm_a.map(|n| strategy.alpha_u / n),
        };
        let n = problem.dim();
        let tol = (config.rtol * dot(problem.rhs(), problem.rhs()).sqrt()).max(config.atol);
        Ok(Self {
            problem,
            config,
            observer,
            rule: None,
            reference_step,
            tol,
            start_mults: op.mults(),
            norm_mults,
            x: x0.to_vec(),
            g: vec![0.0; n],
            p: vec![0.0; n],
            ap: vec![0.0; n],
            free: vec![0.0; n],
            reduced: vec![0.0; n],
            chopped: vec![0.0; n],
            scratch: vec![0.0; n],
            gf_sq: 0.0,
            gc_sq: 0.0,
            report: SolveReport {
                x: Vec::new(),
                converged: false,
                projected_gradient_norm: f64::NAN,
                hessian_mults: 0,
                setup_mults: 0,
                norm_mults,
                cg_steps: 0,
                expansion_steps: 0,
                half_step_expansions: 0,
                proportioning_steps: 0,
                outer_iterations: 0,
                dot_products: 0,
                vector_updates: 0,
                gradient_splittings: 0,
                final_cost: f64::NAN,
            },
        })
    }

    fn spent(&self) -> u64 {
        self.problem.operator().mults() - self.start_mults
    }

    /// `g <- A x - b`.
    fn recompute_gradient(&mut self) {
        self.problem.operator().apply_into(&self.x, &mut self.g);
        for (gi, bi) in self.g.iter_mut().zip(self.problem.rhs()) {
            *gi -= bi;
        }
        self.report.vector_updates += 1;
    }

    fn resplit(&mut self) {
        let (l, u) = (self.problem.lower(), self.problem.upper());
        let (mut gf_sq, mut gc_sq) = (0.0, 0.0);
        for j in 0..self.x.len() {
            let c = split_component(self.x[j], l[j], u[j], self.g[j]);
            self.free[j] = c.free;
            self.chopped[j] = c.chopped;
            gf_sq += c.free * c.free;
            gc_sq += c.chopped * c.chopped;
            if let Some(step) = self.reference_step {
                self.reduced[j] = reduced_component(self.x[j], l[j], u[j], c.free, step);
            }
        }
        self.gf_sq = gf_sq;
        self.gc_sq = gc_sq;
        self.report.gradient_splittings += 1;
        self.report.dot_products += 2;
    }

    fn projected_norm(&self) -> f64 {
        (self.gf_sq + self.gc_sq).sqrt()
    }

    fn finish(mut self) -> Result<SolveReport> {
        self.recompute_gradient();
        self.report.setup_mults = self.spent();
        self.resplit();
        self.p.copy_from_slice(&self.free);

        let gamma_sq = self.config.gamma * self.config.gamma;
        let mut iteration = 0usize;
        loop {
            let done = match self.rule {
                Some(rule) => rule(&self.x, self.projected_norm()),
                None => self.projected_norm() <= self.tol,
            };
            if done {
                self.report.converged = true;
                break;
            }
            if self.spent() >= self.config.max_hessian_mults {
                break;
            }
            let before = self.spent();
            let x_before = self.observer.as_ref().map(|_| self.x.clone());
            let (kind, trace) = if self.gc_sq <= gamma_sq * self.gf_sq {
                self.proportional_step()?
            } else {
                self.proportioning_step()?;
                (StepKind::Proportioning, None)
            };
            match kind {
                StepKind::Cg => self.report.cg_steps += 1,
                StepKind::Proportioning => self.report.proportioning_steps += 1,
                StepKind::Expansion { line_search, .. } => {
                    self.report.expansion_steps += 1;
                    if !line_search {
                        self.report.half_step_expansions += 1;
                    }
                }
            }
            let step_mults = self.spent() - before;
            if let (Some(obs), Some(x_before)) = (self.observer.as_mut(), x_before) {
                let pg = (self.gf_sq + self.gc_sq).sqrt();
                obs(&StepEvent {
                    iteration,
                    kind,
                    hessian_mults: step_mults,
                    x_before: &x_before,
                    x: &self.x,
                    g: &self.g,
                    projected_gradient_norm: pg,
                    expansion: trace.as_ref(),
                });
            }
            iteration += 1;
        }

        let mut r = self.report;
        r.projected_gradient_norm = (self.gf_sq + self.gc_sq).sqrt();
        r.hessian_mults = self.problem.operator().mults() - self.start_mults;
        r.final_cost = 0.5
            * self
                .x
                .iter()
                .zip(&self.g)
                .zip(self.problem.rhs())
                .map(|((x, g), b)| x * (g - b))
                .sum::<f64>();
        r.dot_products += 1;
        r.norm_mults = self.norm_mults;
        r.x = self.x;
        Ok(r)
    }

    /// CG step or expansion, whichever the feasible step length allows.
    fn proportional_step(&mut self) -> Result<(StepKind, Option<ExpansionTrace>)> {
        self.problem.operator().apply_into(&self.p, &mut self.ap);
        let pap = dot(&self.p, &self.ap);
        if !(pap > 0.0) {
            return Err(Error::NonpositiveCurvature {
                direction: "search",
                curvature: pap,
            });
        }
        let alpha_cg = dot(&self.g, &self.p) / pap;
        let alpha_f = max_feasible_step(&self.x, &self.p, self.problem.lower(), self.problem.upper());
        self.report.dot_products += 2;

        if alpha_cg <= alpha_f {
            self.cg_step(alpha_cg, pap);
            return Ok((StepKind::Cg, None));
        }
        match self.config.strategy.kind {
            StrategyKind::ProjCg => {
                self.projcg_expansion(alpha_cg);
                Ok((
                    StepKind::Expansion {
                        strategy: StrategyKind::ProjCg,
                        line_search: true,
                    },
                    None,
                ))
            }
            kind => {
                let trace = self.expansion(alpha_cg, alpha_f)?;
                let line_search = trace.step_length.is_some();
                let trace = self.observer.is_some().then_some(trace);
                Ok((
                    StepKind::Expansion {
                        strategy: kind,
                        line_search,
                    },
                    trace,
                ))
            }
        }
    }

    fn cg_step(&mut self, alpha_cg: f64, pap: f64) {
        let (l, u) = (self.problem.lower(), self.problem.upper());
        step_feasible(&mut self.x, &self.p, alpha_cg, l, u);
        axpy(&mut self.g, -alpha_cg, &self.ap);
        self.resplit();
        let beta = dot(&self.ap, &self.free) / pap;
        for (pi, fi) in self.p.iter_mut().zip(&self.free) {
            *pi = fi - beta * *pi;
        }
        self.report.dot_products += 1;
        self.report.vector_updates += 3;
    }

    fn projcg_expansion(&mut self, alpha_cg: f64) {
        for (xi, pi) in self.x.iter_mut().zip(&self.p) {
            *xi -= alpha_cg * pi;
        }
        self.problem.project_in_place(&mut self.x);
        self.recompute_gradient();
        self.resplit();
        self.p.copy_from_slice(&self.free);
        self.report.vector_updates += 2;
    }

    fn expansion(&mut self, alpha_cg: f64, alpha_f: f64) -> Result<ExpansionTrace> {
        let strategy = self.config.strategy;
        let (l, u) = (self.problem.lower(), self.problem.upper());

        step_feasible(&mut self.x, &self.p, alpha_f, l, u);
        axpy(&mut self.g, -alpha_f, &self.ap);
        self.report.vector_updates += 2;
        self.resplit();

        let mut trace = ExpansionTrace {
            alpha_cg,
            alpha_f,
            x_half: Vec::new(),
            g_half: Vec::new(),
            free_half: Vec::new(),
            reduced_half: None,
            reference_step: self.reference_step,
            step_length: None,
        };
        if self.observer.is_some() {
            trace.x_half = self.x.clone();
            trace.g_half = self.g.clone();
            trace.free_half = self.free.clone();
            trace.reduced_half = self.reference_step.map(|_| self.reduced.clone());
        }

        let (steplen, direction) = match strategy.kind {
            StrategyKind::Fixed => (SplitVector::Free, SplitVector::Free),
            _ => (strategy.steplen, strategy.direction),
        };
        let d = match steplen {
            SplitVector::Free => &self.free,
            SplitVector::Reduced => &self.reduced,
        };
        let dd = dot(d, d);
        self.report.dot_products += 1;
        if dd == 0.0 {
            // nothing free to move at the half step
            self.p.copy_from_slice(&self.free);
            return Ok(trace);
        }

        let step_length = match strategy.kind {
            StrategyKind::Fixed => self.reference_step.expect("fixed step needs a norm"),
            StrategyKind::OptApprox => {
                self.report.dot_products += 1;
                self.reference_step.expect("optapprox needs a norm") * (dot(d, &self.g) / dd)
            }
            StrategyKind::Opt => {
                self.problem.operator().apply_into(d, &mut self.scratch);
                let dad = dot(d, &self.scratch);
                if !(dad > 0.0) {
                    return Err(Error::NonpositiveCurvature {
                        direction: "expansion",
                        curvature: dad,
                    });
                }
                self.report.dot_products += 2;
                strategy.alpha_u * dot(d, &self.g) / dad
            }
            StrategyKind::ProjCg => unreachable!("handled by the caller"),
        };
        trace.step_length = Some(step_length);

        match direction {
            SplitVector::Free => {
                for j in 0..self.x.len() {
                    self.x[j] = clamp(self.x[j] - step_length * self.free[j], l[j], u[j]);
                }
            }
            SplitVector::Reduced => {
                let reference = self.reference_step.expect("reduced direction needs a norm");
                for j in 0..self.x.len() {
                    let r = self.reduced[j];
                    // a capped component reaches its bound once the step is at
                    // least the reference step
                    if r != self.free[j] && step_length >= reference {
                        self.x[j] = if r > 0.0 { l[j] } else { u[j] };
                    } else {
                        self.x[j] = clamp(self.x[j] - step_length * r, l[j], u[j]);
                    }
                }
            }
        }
        self.report.vector_updates += 1;
        self.recompute_gradient();
        self.resplit();
        self.p.copy_from_slice(&self.free);
        Ok(trace)
    }

    fn proportioning_step(&mut self) -> Result<()> {
        let (l, u) = (self.problem.lower(), self.problem.upper());
        self.problem
            .operator()
            .apply_into(&self.chopped, &mut self.scratch);
        let curvature = dot(&self.chopped, &self.scratch);
        if !(curvature > 0.0) {
            return Err(Error::NonpositiveCurvature {
                direction: "chopped gradient",
                curvature,
            });
        }
        let alpha = dot(&self.g, &self.chopped) / curvature;
        // with two finite bounds the exact step may overshoot the far bound
        let cap = max_feasible_step(&self.x, &self.chopped, l, u);
        let alpha = alpha.min(cap);
        step_feasible(&mut self.x, &self.chopped, alpha, l, u);
        axpy(&mut self.g, -alpha, &self.scratch);
        self.resplit();
        self.p.copy_from_slice(&self.free);
        self.report.dot_products += 2;
        self.report.vector_updates += 3;
        Ok(())
    }
}
