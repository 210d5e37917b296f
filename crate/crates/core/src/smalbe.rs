//! Augmented Lagrangian outer loop for box QPs with equality constraints.
//!
//! Each outer iteration minimizes
//! `L(x, mu, M) = f(x) + mu'(Gx - e) + M/2 ||Gx - e||^2` over the box with
//! MPRGP, stopping the inner solve once `||g^P|| <= min(M ||Gx - e||, eta_abs)`.
//! The multipliers are then updated by `mu += M (Gx - e)` and the penalty is
//! divided by `penalty_reduction` whenever the Lagrangian grew by at most
//! `M/2 ||Gx - e||^2` since the previous outer iteration.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linop::{
    dot, estimate_norm, norm, LinearOperator, OperatorRef, DEFAULT_NORM_MAX_ITERS,
    DEFAULT_NORM_REL_TOL,
};
use crate::mprgp::{self, solve_until, SolveReport, SolverConfig};
use crate::qp::BoxQp;

/// `base + M G'G`, applied as `base(v) + M G'(G v)`.
///
/// One application counts as one application of `base`.
#[derive(Debug)]
pub struct AugmentedOperator {
    base: OperatorRef,
    g: DMatrix<f64>,
    penalty: f64,
}

impl AugmentedOperator {
    pub fn new(base: OperatorRef, g: DMatrix<f64>, penalty: f64) -> Result<Self> {
        if g.ncols() != base.dim() {
            return Err(Error::DimensionMismatch {
                what: "equality matrix columns",
                expected: base.dim(),
                found: g.ncols(),
            });
        }
        if !(penalty >= 0.0 && penalty.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "penalty",
                reason: format!("must be nonnegative and finite, got {penalty}"),
            });
        }
        Ok(Self { base, g, penalty })
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }
}

impl LinearOperator for AugmentedOperator {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.base.apply_into(x, y);
        if self.penalty == 0.0 || self.g.nrows() == 0 {
            return;
        }
        let gx = &self.g * DVector::from_column_slice(x);
        let back = self.g.tr_mul(&gx);
        for (yi, bi) in y.iter_mut().zip(back.iter()) {
            *yi += self.penalty * bi;
        }
    }

    fn mults(&self) -> u64 {
        self.base.mults()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmalbeConfig {
    /// Initial penalty `M`.
    pub penalty: f64,
    /// Cap on the inner stopping bound, in units of `||A||`.
    pub eta: f64,
    /// Divisor applied to `M` after a sufficient Lagrangian decrease.
    pub penalty_reduction: f64,
    /// Relative tolerance on `||g^P||` (against `||b||`) and `||Gx - e||` (against `||e||`).
    pub outer_rtol: f64,
    pub max_outer: usize,
    /// Inner solver settings; `rtol`/`atol` are replaced by the outer rule
    /// and `norm_a` refers to the original operator.
    pub inner: SolverConfig,
}

impl SmalbeConfig {
    /// `M = 100 ||A||`, `eta = 1.1 ||A||`, reduction by 10, tolerance `1e-6`.
    pub fn from_norm(norm_a: f64, inner: SolverConfig) -> Self {
        Self {
            penalty: 100.0 * norm_a,
            eta: 1.1 * norm_a,
            penalty_reduction: 10.0,
            outer_rtol: 1e-6,
            max_outer: 100,
            inner: SolverConfig {
                norm_a: Some(norm_a),
                ..inner
            },
        }
    }

    pub fn with_outer_rtol(mut self, outer_rtol: f64) -> Self {
        self.outer_rtol = outer_rtol;
        self
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("penalty", self.penalty),
            ("eta", self.eta),
            ("outer_rtol", self.outer_rtol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if !(self.penalty_reduction > 1.0) {
            return Err(Error::InvalidParameter {
                name: "penalty_reduction",
                reason: format!("must exceed 1, got {}", self.penalty_reduction),
            });
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter {
                name: "max_outer",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmalbeReport {
    /// Counters summed over all inner solves; `outer_iterations` is set and
    /// `final_cost` is the cost of the original QP.
    pub report: SolveReport,
    pub multipliers: Vec<f64>,
    pub feasibility_norm: f64,
    /// Penalty after the last outer iteration.
    pub penalty: f64,
}

impl SmalbeReport {
    pub fn x(&self) -> &[f64] {
        &self.report.x
    }

    pub fn converged(&self) -> bool {
        self.report.converged
    }
}

/// Numerical rank of `g` from its singular values.
pub fn rank(g: &DMatrix<f64>) -> usize {
    if g.nrows() == 0 || g.ncols() == 0 {
        return 0;
    }
    let sv = g.clone().svd(false, false).singular_values;
    let top = sv.max();
    let tol = top * f64::EPSILON * g.nrows().max(g.ncols()) as f64;
    sv.iter().filter(|s| **s > tol).count()
}

fn residual(g: &DMatrix<f64>, e: &[f64], x: &[f64]) -> Vec<f64> {
    let gx = g * DVector::from_column_slice(x);
    gx.iter().zip(e).map(|(a, b)| a - b).collect()
}

/// `Ax - b + G'(mu + M (Gx - e))`: the gradient of the augmented Lagrangian.
pub fn lagrangian_gradient(problem: &BoxQp, x: &[f64], mu: &[f64], penalty: f64) -> Result<Vec<f64>> {
    let eq = problem.equality().ok_or(Error::InvalidParameter {
        name: "problem",
        reason: "no equality constraints".into(),
    })?;
    if mu.len() != eq.rhs.len() {
        return Err(Error::DimensionMismatch {
            what: "multipliers",
            expected: eq.rhs.len(),
            found: mu.len(),
        });
    }
    let mut g = problem.gradient(x)?;
    let r = residual(&eq.matrix, &eq.rhs, x);
    let w: Vec<f64> = mu.iter().zip(&r).map(|(m, ri)| m + penalty * ri).collect();
    let back = eq.matrix.tr_mul(&DVector::from_vec(w));
    for (gi, bi) in g.iter_mut().zip(back.iter()) {
        *gi += bi;
    }
    Ok(g)
}

/// Minimizes the QP subject to its box and `Gx = e`, starting from `x0`.
///
/// Without equality rows this is exactly [`mprgp::solve`] with `rtol =
/// outer_rtol`.
pub fn solve_equality(problem: &BoxQp, x0: &[f64], config: &SmalbeConfig) -> Result<SmalbeReport> {
    config.validate()?;
    let eq = match problem.equality() {
        Some(eq) if !eq.rhs.is_empty() => eq.clone(),
        _ => {
            let inner = SolverConfig {
                rtol: config.outer_rtol,
                ..config.inner
            };
            let report = mprgp::solve(problem, x0, &inner)?;
            return Ok(SmalbeReport {
                report,
                multipliers: Vec::new(),
                feasibility_norm: 0.0,
                penalty: config.penalty,
            });
        }
    };
    let m = eq.matrix.nrows();
    let r = rank(&eq.matrix);
    if r < m {
        return Err(Error::RankDeficient { rank: r, rows: m });
    }
    problem.check_feasible(x0)?;

    let base = problem.operator().clone();
    let mut norm_mults = 0;
    let norm_a = match config.inner.norm_a {
        Some(v) => v,
        None => {
            let est = estimate_norm(base.as_ref(), DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_REL_TOL)?;
            norm_mults = est.mults_spent;
            est.value
        }
    };
    let g_norm_sq = eq.matrix.clone().svd(false, false).singular_values.max().powi(2);

    let b_norm = norm(problem.rhs());
    let e_norm = norm(&eq.rhs);
    let grad_scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let feas_scale = if e_norm > 0.0 { e_norm } else { 1.0 };
    let grad_tol = config.outer_rtol * grad_scale;
    let feas_tol = config.outer_rtol * feas_scale;
    let eta_abs = config.eta * config.outer_rtol * grad_scale / norm_a;

    let mut x = x0.to_vec();
    let mut mu = vec![0.0; m];
    let mut penalty = config.penalty;
    let mut prev_lagrangian: Option<f64> = None;
    let mut total = SolveReport {
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
    };
    let mut feasibility = norm(&residual(&eq.matrix, &eq.rhs, &x));

    for _ in 0..config.max_outer {
        let op: OperatorRef = Arc::new(AugmentedOperator::new(base.clone(), eq.matrix.clone(), penalty)?);
        // b - G'mu + M G'e
        let shift: Vec<f64> = eq.rhs.iter().zip(&mu).map(|(e, m)| penalty * e - m).collect();
        let back = eq.matrix.tr_mul(&DVector::from_vec(shift));
        let rhs: Vec<f64> = problem.rhs().iter().zip(back.iter()).map(|(b, s)| b + s).collect();
        let inner_problem = BoxQp::new(op, rhs, Some(problem.lower().to_vec()), Some(problem.upper().to_vec()))?;
        let inner_config = SolverConfig {
            rtol: 0.0,
            atol: grad_tol,
            norm_a: Some(norm_a + penalty * g_norm_sq),
            ..config.inner
        };
        let rule = |x: &[f64], pg: f64| {
            let feas = norm(&residual(&eq.matrix, &eq.rhs, x));
            pg <= (penalty * feas).min(eta_abs) || (pg <= grad_tol && feas <= feas_tol)
        };
        let inner = solve_until(&inner_problem, &x, &inner_config, &rule)?;

        accumulate(&mut total, &inner);
        total.outer_iterations += 1;
        x = inner.x;
        let r = residual(&eq.matrix, &eq.rhs, &x);
        feasibility = norm(&r);
        total.projected_gradient_norm = inner.projected_gradient_norm;

        let lagrangian = inner.final_cost + 0.5 * penalty * e_norm * e_norm - dot(&mu, &eq.rhs);
        // f = L - mu'(Gx - e) - M/2 ||Gx - e||^2
        total.final_cost = lagrangian - dot(&mu, &r) - 0.5 * penalty * feasibility * feasibility;
        for (mi, ri) in mu.iter_mut().zip(&r) {
            *mi += penalty * ri;
        }
        if inner.projected_gradient_norm <= grad_tol && feasibility <= feas_tol {
            total.converged = true;
            break;
        }
        if !inner.converged {
            // inner budget exhausted: the outer loop cannot make progress
            break;
        }
        if let Some(prev) = prev_lagrangian {
            if lagrangian <= prev + 0.5 * penalty * feasibility * feasibility {
                penalty /= config.penalty_reduction;
            }
        }
        prev_lagrangian = Some(lagrangian);
    }

    total.norm_mults = norm_mults;
    total.x = x;
    Ok(SmalbeReport {
        report: total,
        multipliers: mu,
        feasibility_norm: feasibility,
        penalty,
    })
}

fn accumulate(total: &mut SolveReport, inner: &SolveReport) {
    total.hessian_mults += inner.hessian_mults;
    total.setup_mults += inner.setup_mults;
    total.cg_steps += inner.cg_steps;
    total.expansion_steps += inner.expansion_steps;
    total.half_step_expansions += inner.half_step_expansions;
    total.proportioning_steps += inner.proportioning_steps;
    total.dot_products += inner.dot_products;
    total.vector_updates += inner.vector_updates;
    total.gradient_splittings += inner.gradient_splittings;
}
