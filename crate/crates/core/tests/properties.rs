#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use mprgp::bench::{generate_eq_toy, generate_obstacle};
use mprgp::linop::{
    estimate_norm_seeded, SparseColumns, DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_REL_TOL,
};
use mprgp::mprgp::{solve_with_observer, ExpansionStrategy, SplitVector, StepKind, StrategyKind};
use mprgp::smalbe::{solve_equality, SmalbeConfig};
use mprgp::svm::{augment_nobias, build_dual, LabeledDataset, Loss};
use mprgp::{solve, LinearOperator, SolverConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn cost(a: &DMatrix<f64>, b: &[f64], x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    0.5 * xv.dot(&(a * &xv)) - xv.dot(&DVector::from_column_slice(b))
}

#[test]
fn norm_estimate_matches_dense_eigenvalue() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let a = random_spd(&mut r, 10, 0.5);
        let exact = largest_eigenvalue(&a);
        let op = operator(&a);
        // the default budget is too small when the top two eigenvalues are close
        let est = estimate_norm_seeded(op.as_ref(), 2000, DEFAULT_NORM_REL_TOL, seed).unwrap();
        assert!((est.value - exact).abs() <= 1e-4 * exact, "seed {seed}: {} vs {exact}", est.value);
        assert!(est.value <= exact * (1.0 + 1e-12));
        assert_eq!(est.mults_spent, op.mults());
        let quick = estimate_norm_seeded(op.as_ref(), DEFAULT_NORM_MAX_ITERS, 1e-4, seed).unwrap();
        assert!(quick.value <= est.value * (1.0 + 1e-12) && quick.mults_spent <= 50);
    }
}

#[test]
fn dual_hessian_matches_triple_loop() {
    let mut r = rng(99);
    for (m, features) in [(1, 1), (7, 3), (30, 12)] {
        let columns: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..features)
                    .map(|_| if r.gen_bool(0.4) { 0.0 } else { r.gen_range(-2.0..2.0) })
                    .collect()
            })
            .collect();
        let labels: Vec<f64> = (0..m).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let data = LabeledDataset::new(
            SparseColumns::from_dense_columns(features, &columns).unwrap(),
            labels.clone(),
        )
        .unwrap();
        let beta = 0.7;
        let c = 2.5;
        let augmented = augment_nobias(&data, beta).unwrap();
        for loss in [Loss::L1, Loss::L2] {
            let qp = build_dual(&augmented, loss, c).unwrap();
            let h = dense_matrix(qp.operator().as_ref());
            for i in 0..m {
                for j in 0..m {
                    let mut k = beta * beta;
                    for f in 0..features {
                        k += columns[i][f] * columns[j][f];
                    }
                    let mut expected = labels[i] * labels[j] * k;
                    if loss == Loss::L2 && i == j {
                        expected += 1.0 / c;
                    }
                    assert!((h[(i, j)] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
                }
            }
        }
    }
}

#[test]
fn obstacle_grid_matches_dense_oracle() {
    // 9 x 9 cells leave 8 x 8 interior nodes
    let qp = generate_obstacle(9, 9, -10.0, -0.05).unwrap();
    assert_eq!(qp.dim(), 64);
    let a = dense_matrix(qp.operator().as_ref());
    let oracle = active_set_oracle(&DenseQp::of(&qp, &a), 1e-13);
    assert!(oracle.iter().any(|v| *v == -0.05), "the obstacle must be touched");
    let x0 = vec![0.0; 64];
    for s in [
        ExpansionStrategy::fixed(1.9),
        ExpansionStrategy::opt(SplitVector::Free, SplitVector::Reduced, 1.0),
        ExpansionStrategy::projcg(),
    ] {
        let r = solve(&qp, &x0, &SolverConfig::default().with_strategy(s).with_rtol(1e-12)).unwrap();
        assert!(r.converged, "{s}");
        let err = max_abs_diff(&r.x, &oracle);
        assert!(err <= 1e-8, "{s}: {err}");
    }
}

#[test]
fn raising_the_obstacle_never_lowers_the_solution() {
    for cells in [4, 6, 9] {
        let heights = [-0.2, -0.1, -0.05, -0.02, 0.0];
        let mut previous: Option<Vec<f64>> = None;
        let mut contacts = Vec::new();
        for h in heights {
            let qp = generate_obstacle(cells, cells, -10.0, h).unwrap();
            let x0 = vec![h.max(0.0); qp.dim()];
            let cfg = SolverConfig::default().with_rtol(1e-12);
            let x = solve(&qp, &x0, &cfg).unwrap().x;
            if let Some(lower) = &previous {
                for (hi, lo) in x.iter().zip(lower) {
                    assert!(*hi >= lo - 1e-10, "cells {cells}, height {h}");
                }
            }
            contacts.push(x.iter().filter(|v| **v == h).count());
            previous = Some(x);
        }
        assert!(contacts.windows(2).all(|w| w[0] <= w[1]), "{contacts:?}");
    }
}

fn check_equality_problem(n: usize, m: usize, seed: u64, enumerate: bool) {
    let qp = generate_eq_toy(n, m, seed).unwrap();
    let a = dense_matrix(qp.operator().as_ref());
    let dense = DenseQp::of(&qp, &a);
    let oracle = if enumerate {
        enumeration_oracle(&dense, 1e-9)
    } else {
        active_set_oracle(&dense, 1e-12)
    };
    let norm_a = largest_eigenvalue(&a);
    let config = SmalbeConfig::from_norm(norm_a, SolverConfig::default()).with_outer_rtol(1e-8);
    let r = solve_equality(&qp, &qp.project(&vec![0.0; n]), &config).unwrap();
    assert!(r.converged());
    let e = &qp.equality().unwrap().rhs;
    assert!(r.feasibility_norm <= 1e-6 * norm(e));
    let err = max_abs_diff(r.x(), &oracle);
    assert!(err <= 1e-6, "n {n}, m {m}, seed {seed}: {err}");
}

#[test]
fn eq_toy_small_matches_enumeration() {
    check_equality_problem(10, 2, 7, true);
}

#[test]
fn eq_toy_full_size_matches_active_set_oracle() {
    check_equality_problem(30, 3, 0, false);
    check_equality_problem(30, 3, 1, false);
}

#[test]
fn enumeration_and_active_set_oracles_agree() {
    for seed in 0..30 {
        let p = random_box_qp(500 + seed, 6);
        let dense = DenseQp::of(&p.qp, &p.a);
        let a = enumeration_oracle(&dense, 1e-10);
        let b = active_set_oracle(&dense, 1e-12);
        assert!(max_abs_diff(&a, &b) <= 1e-10, "seed {seed}");
    }
}

#[test]
fn line_search_decreases_cost_before_projection() {
    use SplitVector::{Free, Reduced};
    let mut checked = 0;
    for seed in 0..40u64 {
        let n = 2 + (seed as usize * 13) % 49;
        let p = random_box_qp(40_000 + seed, n);
        let lambda = largest_eigenvalue(&p.a);
        let b = p.qp.rhs().to_vec();
        for alpha in [0.3, 1.0, 1.9, 2.0] {
            let strategies = [
                ExpansionStrategy::fixed(alpha),
                ExpansionStrategy::optapprox(Free, Free, alpha),
                ExpansionStrategy::optapprox(Reduced, Reduced, alpha),
                ExpansionStrategy::opt(Free, Free, alpha),
                ExpansionStrategy::opt(Reduced, Reduced, alpha),
            ];
            for s in strategies {
                let cfg = SolverConfig::default().with_strategy(s).with_norm(lambda).with_rtol(1e-10);
                solve_with_observer(&p.qp, &p.x0, &cfg, |ev| {
                    let Some(t) = ev.expansion else { return };
                    let Some(step) = t.step_length else { return };
                    let d = match (s.kind, s.steplen) {
                        (StrategyKind::Fixed, _) | (_, Free) => &t.free_half,
                        (_, Reduced) => t.reduced_half.as_ref().unwrap(),
                    };
                    let moved: Vec<f64> = t.x_half.iter().zip(d).map(|(x, di)| x - step * di).collect();
                    let before = cost(&p.a, &b, &t.x_half);
                    let after = cost(&p.a, &b, &moved);
                    assert!(after <= before + 1e-12 * (1.0 + before.abs()), "{s}: {before} -> {after}");
                    checked += 1;
                })
                .unwrap();
            }
        }
    }
    assert!(checked > 100, "only {checked} line searches seen");
}

#[test]
fn proportioning_and_cg_steps_decrease_cost() {
    let mut proportioning = 0;
    for seed in 0..60u64 {
        let p = random_box_qp(50_000 + seed, 2 + seed as usize % 20);
        let b = p.qp.rhs().to_vec();
        let cfg = SolverConfig::default().with_rtol(1e-10);
        solve_with_observer(&p.qp, &p.x0, &cfg, |ev| {
            if matches!(ev.kind, StepKind::Proportioning | StepKind::Cg) {
                let before = cost(&p.a, &b, ev.x_before);
                let after = cost(&p.a, &b, ev.x);
                assert!(after <= before + 1e-12 * (1.0 + before.abs()), "{:?}", ev.kind);
                proportioning += (ev.kind == StepKind::Proportioning) as usize;
            }
        })
        .unwrap();
    }
    assert!(proportioning > 0);
}

#[test]
fn solutions_are_feasible_for_every_start() {
    for seed in 0..20 {
        let p = random_box_qp(60_000 + seed, 8);
        let reference = solve(&p.qp, &p.x0, &SolverConfig::default().with_rtol(1e-13)).unwrap();
        let corner = p.qp.project(&[1e3; 8]);
        let r = solve(&p.qp, &corner, &SolverConfig::default().with_rtol(1e-13)).unwrap();
        assert!(p.qp.is_feasible(&r.x));
        assert!(max_abs_diff(&r.x, &reference.x) <= 1e-9);
    }
}
