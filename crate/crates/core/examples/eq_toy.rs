//! Box constraints plus linear equalities through the augmented Lagrangian loop.
//!
//! cargo run --example eq_toy -- [n] [m] [seed]

use mprgp::bench::generate_eq_toy;
use mprgp::linop::{estimate_norm_seeded, DEFAULT_NORM_MAX_ITERS, DEFAULT_NORM_REL_TOL};
use mprgp::mprgp::ExpansionStrategy;
use mprgp::smalbe::{lagrangian_gradient, solve_equality, SmalbeConfig};
use mprgp::SolverConfig;

fn main() -> mprgp::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<u64>().expect("integer"));
    let n = args.next().unwrap_or(30) as usize;
    let m = args.next().unwrap_or(3) as usize;
    let seed = args.next().unwrap_or(0);

    let problem = generate_eq_toy(n, m, seed)?;
    let norm = estimate_norm_seeded(
        problem.operator().as_ref(),
        DEFAULT_NORM_MAX_ITERS,
        DEFAULT_NORM_REL_TOL,
        seed,
    )?;
    let inner = SolverConfig::default().with_strategy(ExpansionStrategy::opt(
        mprgp::mprgp::SplitVector::Free,
        mprgp::mprgp::SplitVector::Free,
        1.0,
    ));
    let config = SmalbeConfig::from_norm(norm.value, inner).with_outer_rtol(1e-8);
    let x0 = problem.project(&vec![0.0; n]);
    let r = solve_equality(&problem, &x0, &config)?;

    println!(
        "n = {n}, m = {m}, seed = {seed}: converged = {}, {} outer iterations, {} Hessian mults",
        r.converged(),
        r.report.outer_iterations,
        r.report.hessian_mults
    );
    println!("||Gx - e|| = {:.3e}, final penalty {:.3e}", r.feasibility_norm, r.penalty);
    println!("multipliers = {:.6?}", r.multipliers);
    println!("cost = {:.10}", r.report.final_cost);

    // KKT check: the Lagrangian gradient must be zero on free components
    let lg = lagrangian_gradient(&problem, r.x(), &r.multipliers, 0.0)?;
    let free_residual = r
        .x()
        .iter()
        .zip(&lg)
        .filter(|(x, _)| x.abs() < 1.2)
        .map(|(_, g)| g.abs())
        .fold(0.0, f64::max);
    println!("max |dL/dx| on free components = {free_residual:.3e}");
    Ok(())
}
