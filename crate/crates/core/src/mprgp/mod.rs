//! Modified proportioning with reduced gradient projections.
//!
//! Each iteration either minimizes along a conjugate direction inside the
//! current face (CG step), leaves the face when the CG step would exit the
//! box (expansion), or releases bound components whose chopped gradient
//! dominates (proportioning). The expansion step is configurable through
//! [`ExpansionStrategy`].
//!
//! ```
//! use std::sync::Arc;
//! use mprgp::{linop::DenseOperator, qp::BoxQp, mprgp::{solve, SolverConfig}};
//!
//! let a = Arc::new(DenseOperator::identity(2));
//! let qp = BoxQp::new(a, vec![2.0, -1.0], Some(vec![0.0; 2]), Some(vec![1.0; 2])).unwrap();
//! let report = solve(&qp, &[0.5, 0.5], &SolverConfig::default()).unwrap();
//! assert!(report.converged);
//! assert_eq!(report.x, vec![1.0, 0.0]);
//! ```

mod solver;
mod strategy;

pub use solver::{
    max_feasible_step, solve, solve_with_observer, ExpansionTrace, SolveReport, SolverConfig,
    StepEvent, StepKind,
};
pub(crate) use solver::solve_until;
pub use strategy::{parse_strategy, table_strategies, ExpansionStrategy, SplitVector, StrategyKind};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::linop::{DenseOperator, OperatorRef};
    use crate::qp::BoxQp;
    use std::sync::Arc;

    fn dense(rows: &[Vec<f64>]) -> OperatorRef {
        Arc::new(DenseOperator::from_rows(rows).unwrap())
    }

    fn all_strategies(alpha_u: f64) -> Vec<ExpansionStrategy> {
        table_strategies()
            .into_iter()
            .map(|s| s.with_alpha_u(alpha_u))
            .collect()
    }

    fn tight(strategy: ExpansionStrategy, norm: f64) -> SolverConfig {
        SolverConfig {
            rtol: 1e-12,
            ..SolverConfig::default()
        }
        .with_strategy(strategy)
        .with_norm(norm)
    }

    #[test]
    fn identity_hessian_gives_projected_rhs() {
        let qp = BoxQp::new(
            Arc::new(DenseOperator::identity(2)),
            vec![2.0, -1.0],
            Some(vec![0.0; 2]),
            Some(vec![1.0; 2]),
        )
        .unwrap();
        for s in all_strategies(1.9) {
            let r = solve(&qp, &[0.0, 0.0], &tight(s, 1.0)).unwrap();
            assert!(r.converged, "{s}");
            assert_eq!(r.x, vec![1.0, 0.0], "{s}");
        }
    }

    #[test]
    fn both_components_at_upper_bound() {
        // enumeration of the 3^2 configurations: only "both at upper" is KKT
        let a = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let (b, u) = ([2.0, 2.0], [0.5, 0.5]);
        let mut kkt = Vec::new();
        for c0 in 0..3 {
            for c1 in 0..3 {
                let mut x = [0.0; 2];
                for (j, c) in [c0, c1].into_iter().enumerate() {
                    x[j] = match c {
                        0 => 0.0,
                        1 => u[j],
                        _ => b[j] / a[j][j],
                    };
                }
                if x.iter().zip(&u).any(|(xi, ui)| *xi < 0.0 || xi > ui) {
                    continue;
                }
                let ok = [c0, c1].into_iter().enumerate().all(|(j, c)| {
                    let g = a[j][j] * x[j] - b[j];
                    match c {
                        0 => g >= 0.0,
                        1 => g <= 0.0,
                        _ => true,
                    }
                });
                if ok {
                    kkt.push(x);
                }
            }
        }
        assert_eq!(kkt, vec![[0.5, 0.5]]);

        let qp = BoxQp::new(dense(&a), b.to_vec(), Some(vec![0.0; 2]), Some(u.to_vec())).unwrap();
        for s in all_strategies(1.0) {
            let r = solve(&qp, &[0.0, 0.0], &tight(s, 2.0)).unwrap();
            assert_eq!(r.x, vec![0.5, 0.5], "{s}");
            assert_eq!(qp.active_set(&r.x).unwrap().at_upper, vec![0, 1]);
        }
    }

    #[test]
    fn unconstrained_one_dimensional_converges_in_one_cg_step() {
        let qp = BoxQp::new(dense(&[vec![4.0]]), vec![3.0], None, None).unwrap();
        let r = solve(&qp, &[0.0], &tight(ExpansionStrategy::projcg(), 4.0)).unwrap();
        assert_eq!(r.x, vec![0.75]);
        assert_eq!((r.cg_steps, r.expansion_steps, r.proportioning_steps), (1, 0, 0));
        assert_eq!(r.hessian_mults, 2);
        assert_eq!(r.setup_mults, 1);

        let qp = BoxQp::new(Arc::new(DenseOperator::identity(3)), vec![1.0, -2.0, 0.5], None, None)
            .unwrap();
        let r = solve(&qp, &[0.0; 3], &tight(ExpansionStrategy::projcg(), 1.0)).unwrap();
        assert_eq!(r.x, vec![1.0, -2.0, 0.5]);
        assert_eq!(r.cg_steps, 1);
    }

    #[test]
    fn first_cg_step_makes_gradient_orthogonal_to_direction() {
        let qp = BoxQp::new(dense(&[vec![1.0, 0.0], vec![0.0, 2.0]]), vec![1.0, 1.0], None, None)
            .unwrap();
        let cfg = tight(ExpansionStrategy::projcg(), 2.0);
        let mut seen = false;
        solve_with_observer(&qp, &[0.0, 0.0], &cfg, |ev| {
            if ev.iteration == 0 {
                assert_eq!(ev.kind, StepKind::Cg);
                // the first direction is the initial gradient -b
                let p0 = [-1.0, -1.0];
                let ortho: f64 = ev.g.iter().zip(p0).map(|(g, p)| g * p).sum();
                assert!(ortho.abs() < 1e-15);
                seen = true;
            }
        })
        .unwrap();
        assert!(seen);
    }

    fn one_d_upper() -> BoxQp {
        BoxQp::new(dense(&[vec![1.0]]), vec![2.0], None, Some(vec![1.0])).unwrap()
    }

    #[test]
    fn opt_expansion_recovers_the_bound_minimizer() {
        // f = x^2/2 - 2x on x <= 1: the minimizer is x = 1 with g = -1
        let qp = one_d_upper();
        let s = ExpansionStrategy::opt(SplitVector::Free, SplitVector::Free, 1.0);
        let mut kinds = Vec::new();
        let r = solve_with_observer(&qp, &[0.0], &tight(s, 1.0), |ev| {
            let t = ev.expansion.unwrap();
            assert_eq!((t.alpha_f, t.alpha_cg), (0.5, 1.0));
            kinds.push(ev.kind);
        })
        .unwrap();
        assert_eq!(r.x, vec![1.0]);
        assert!(r.converged);
        assert_eq!(r.expansion_steps, 1);
        assert_eq!(r.half_step_expansions, 1);
        assert_eq!(kinds.len(), 1);
    }

    #[test]
    fn projcg_lands_on_the_bound_in_one_expansion() {
        let qp = one_d_upper();
        let r = solve(&qp, &[0.0], &tight(ExpansionStrategy::projcg(), 1.0)).unwrap();
        assert_eq!(r.x, vec![1.0]);
        assert_eq!((r.expansion_steps, r.cg_steps, r.proportioning_steps), (1, 0, 0));
        assert_eq!(r.hessian_mults, 1 + 2);
    }

    #[test]
    fn opt_on_scalar_operator_halves_alpha_u() {
        // A = 2I: the half step ends at (1, 1.5) with g = (-2, -3), d = (0, -3)
        let qp = BoxQp::new(
            Arc::new(DenseOperator::diagonal(&[2.0, 2.0])),
            vec![4.0, 6.0],
            Some(vec![-10.0, -10.0]),
            Some(vec![1.0, 10.0]),
        )
        .unwrap();
        let s = ExpansionStrategy::opt(SplitVector::Free, SplitVector::Free, 1.4);
        let mut lengths = Vec::new();
        solve_with_observer(&qp, &[0.0, 0.0], &tight(s, 2.0), |ev| {
            if let Some(t) = ev.expansion {
                assert_eq!(t.x_half, vec![1.0, 1.5]);
                assert_eq!(t.g_half, vec![-2.0, -3.0]);
                lengths.push(t.step_length.unwrap());
            }
        })
        .unwrap();
        assert_eq!(lengths.len(), 1);
        assert!((lengths[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn proportioning_frees_a_pulled_component() {
        // x on its lower bound, g = -3, A = 1: alpha = 1 moves x by 3
        let qp = BoxQp::new(dense(&[vec![1.0]]), vec![3.0], Some(vec![0.0]), None).unwrap();
        let mut first = None;
        let r = solve_with_observer(&qp, &[0.0], &tight(ExpansionStrategy::projcg(), 1.0), |ev| {
            first.get_or_insert((ev.kind, ev.x.to_vec(), ev.hessian_mults));
        })
        .unwrap();
        assert_eq!(first, Some((StepKind::Proportioning, vec![3.0], 1)));
        assert_eq!(r.x, vec![3.0]);
        assert_eq!(r.iterations(), 1);
    }

    #[test]
    fn proportioning_never_leaves_the_box() {
        // the exact chopped step would overshoot the upper bound
        let qp = BoxQp::new(dense(&[vec![1.0]]), vec![3.0], Some(vec![0.0]), Some(vec![1.0]))
            .unwrap();
        let r = solve(&qp, &[0.0], &tight(ExpansionStrategy::projcg(), 1.0)).unwrap();
        assert_eq!(r.x, vec![1.0]);
        assert!(r.converged);
    }

    #[test]
    fn feasible_step_examples() {
        let inf = f64::INFINITY;
        assert_eq!(max_feasible_step(&[0.5], &[1.0], &[0.0], &[inf]), 0.5);
        assert_eq!(max_feasible_step(&[0.5], &[0.0], &[0.0], &[1.0]), inf);
        assert_eq!(max_feasible_step(&[0.0, 0.5], &[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]), 0.0);
        assert_eq!(max_feasible_step(&[0.5], &[-2.0], &[0.0], &[1.0]), 0.25);
        assert_eq!(max_feasible_step(&[3.0], &[1.0], &[-inf], &[inf]), inf);
    }

    #[test]
    fn fixed_equals_optapprox_with_free_step_vector() {
        let a = dense(&[vec![3.0, 1.0, 0.0], vec![1.0, 2.0, 0.5], vec![0.0, 0.5, 1.0]]);
        let qp = BoxQp::new(a, vec![4.0, -3.0, 2.0], Some(vec![0.0; 3]), Some(vec![1.0; 3]))
            .unwrap();
        let fixed = solve(&qp, &[0.5; 3], &tight(ExpansionStrategy::fixed(1.3), 3.7)).unwrap();
        let approx = ExpansionStrategy::optapprox(SplitVector::Free, SplitVector::Free, 1.3);
        let other = solve(&qp, &[0.5; 3], &tight(approx, 3.7)).unwrap();
        // optapprox evaluates d'g, which the fixed step never needs
        assert_eq!(fixed.dot_products + other.expansion_steps, other.dot_products);
        assert_eq!(
            SolveReport {
                dot_products: 0,
                ..fixed
            },
            SolveReport {
                dot_products: 0,
                ..other
            }
        );
    }

    #[test]
    fn counts_match_operator_counter() {
        let a = dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let qp = BoxQp::new(a.clone(), vec![10.0, -4.0], Some(vec![0.0; 2]), None).unwrap();
        for s in all_strategies(1.9) {
            let before = a.mults();
            let mut per_kind = 0;
            let r = solve_with_observer(&qp, &[1.0, 1.0], &tight(s, 5.0), |ev| {
                assert_eq!(ev.hessian_mults, ev.kind.hessian_mults(), "{s}");
                per_kind += ev.hessian_mults;
            })
            .unwrap();
            assert_eq!(r.hessian_mults, a.mults() - before);
            assert_eq!(r.hessian_mults, per_kind + r.setup_mults);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let qp = one_d_upper();
        assert!(matches!(
            solve(&qp, &[2.0], &SolverConfig::default()),
            Err(Error::Infeasible { .. })
        ));
        let cfg = SolverConfig {
            gamma: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve(&qp, &[0.0], &cfg).is_err());
        let cfg = SolverConfig::default().with_strategy(ExpansionStrategy::fixed(2.5));
        assert!(solve(&qp, &[0.0], &cfg).is_err());
    }

    #[test]
    fn indefinite_direction_is_reported() {
        let qp = BoxQp::new(dense(&[vec![-1.0]]), vec![1.0], Some(vec![-5.0]), Some(vec![5.0]))
            .unwrap();
        assert!(matches!(
            solve(&qp, &[0.0], &SolverConfig::default()),
            Err(Error::NonpositiveCurvature { .. })
        ));
    }

    #[test]
    fn budget_exhaustion_is_reported_not_thrown() {
        let a = dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let qp = BoxQp::new(a, vec![1.0, 2.0], None, None).unwrap();
        let cfg = SolverConfig {
            max_hessian_mults: 1,
            ..tight(ExpansionStrategy::projcg(), 5.0)
        };
        let r = solve(&qp, &[0.0, 0.0], &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.hessian_mults, 1);
        assert_eq!(r.iterations(), 0);
    }

    #[test]
    fn norm_is_estimated_when_absent() {
        let qp = one_d_upper();
        let cfg = SolverConfig::default().with_strategy(ExpansionStrategy::fixed(1.0));
        let r = solve(&qp, &[0.0], &cfg).unwrap();
        assert!(r.norm_mults > 0);
        assert!(r.converged);
    }

    #[test]
    fn final_cost_matches_direct_evaluation() {
        let a = dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let qp = BoxQp::new(a, vec![1.0, 2.0], Some(vec![0.2, 0.0]), None).unwrap();
        let r = solve(&qp, &[0.5, 0.5], &tight(ExpansionStrategy::projcg(), 5.0)).unwrap();
        let direct = qp.cost(&r.x).unwrap();
        assert!((r.final_cost - direct).abs() < 1e-14);
    }
}
