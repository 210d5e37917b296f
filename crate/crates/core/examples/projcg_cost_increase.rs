//! A projected CG expansion that raises the cost, next to the half-step
//! expansion that lowers it. Both finish one step later.

use std::sync::Arc;

use mprgp::linop::DenseOperator;
use mprgp::mprgp::{solve_with_observer, ExpansionStrategy, SplitVector, StepKind};
use mprgp::{BoxQp, SolverConfig};

fn main() -> mprgp::Result<()> {
    let a = DenseOperator::from_rows(&[vec![1.0, -1.0], vec![-1.0, 2.0]])?;
    let problem = BoxQp::new(
        Arc::new(a),
        vec![-2.0, -1.0],
        Some(vec![0.0, f64::NEG_INFINITY]),
        None,
    )?;
    let x0 = [1.0, 1.0];
    // unconstrained minimizer (-5, -3); constrained one (0, -0.5)

    for strategy in [
        ExpansionStrategy::projcg(),
        ExpansionStrategy::fixed(1.0),
        ExpansionStrategy::opt(SplitVector::Free, SplitVector::Free, 1.0),
    ] {
        println!("{}:", strategy.name());
        let config = SolverConfig::default()
            .with_strategy(strategy)
            .with_rtol(1e-14)
            .with_norm(0.5 * (3.0 + 5f64.sqrt()));
        let cost = |x: &[f64]| 0.5 * (x[0] * x[0] - 2.0 * x[0] * x[1] + 2.0 * x[1] * x[1]) + 2.0 * x[0] + x[1];
        let r = solve_with_observer(&problem, &x0, &config, |e| {
            let kind = match e.kind {
                StepKind::Cg => "cg",
                StepKind::Expansion { .. } => "expansion",
                StepKind::Proportioning => "proportioning",
            };
            println!(
                "  {kind:13} {:?} -> {:?}   f {:+.4} -> {:+.4}",
                e.x_before,
                e.x,
                cost(e.x_before),
                cost(e.x)
            );
        })?;
        println!("  {} steps, {} Hessian mults\n", r.iterations(), r.hessian_mults);
    }
    Ok(())
}
