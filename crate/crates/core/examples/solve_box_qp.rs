//! Solve a small dense box-constrained QP with every expansion strategy.
//!
//! cargo run --example solve_box_qp [-- problem.json]

use std::sync::Arc;

use mprgp::bench::read_qp;
use mprgp::linop::DenseOperator;
use mprgp::mprgp::table_strategies;
use mprgp::{solve, BoxQp, SolverConfig};

fn demo_problem() -> mprgp::Result<BoxQp> {
    let a = DenseOperator::from_rows(&[
        vec![4.0, 1.0, 0.0, 0.0],
        vec![1.0, 4.0, 1.0, 0.0],
        vec![0.0, 1.0, 4.0, 1.0],
        vec![0.0, 0.0, 1.0, 4.0],
    ])?;
    let inf = f64::INFINITY;
    BoxQp::new(
        Arc::new(a),
        vec![8.0, -3.0, 1.0, 6.0],
        Some(vec![0.0, -0.5, 0.0, -inf]),
        Some(vec![1.5, inf, 0.2, 1.0]),
    )
}

fn main() -> mprgp::Result<()> {
    let problem = match std::env::args().nth(1) {
        Some(path) => read_qp(path)?,
        None => demo_problem()?,
    };
    let x0 = problem.project(&vec![0.0; problem.dim()]);

    for strategy in table_strategies() {
        let config = SolverConfig::default()
            .with_strategy(strategy.with_alpha_u(1.9))
            .with_rtol(1e-10);
        let r = solve(&problem, &x0, &config)?;
        println!(
            "{:16} converged={} mults={:3} (cg {}, exp {}, prop {}) f={:.10} x={:.6?}",
            config.strategy.name(),
            r.converged,
            r.hessian_mults,
            r.cg_steps,
            r.expansion_steps,
            r.proportioning_steps,
            r.final_cost,
            r.x
        );
    }

    let active = problem.active_set(&solve(&problem, &x0, &SolverConfig::default())?.x)?;
    println!("at lower bound: {:?}", active.at_lower);
    println!("at upper bound: {:?}", active.at_upper);
    Ok(())
}
