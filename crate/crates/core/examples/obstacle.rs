//! Membrane pushed onto a flat obstacle; compares the expansion strategies.
//!
//! cargo run --release --example obstacle -- [cells] [obstacle height]

use mprgp::bench::{emit, generate_obstacle, run_sweep, Format, ProblemSource, SweepSpec};
use mprgp::mprgp::{parse_strategy, ExpansionStrategy};
use mprgp::{solve, SolverConfig};

fn main() -> mprgp::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(32, |s| s.parse().expect("cells"));
    let height: f64 = args.next().map_or(-0.5, |s| s.parse().expect("height"));
    let load = -10.0;

    let problem = generate_obstacle(cells, cells, load, height)?;
    let x0 = problem.project(&vec![0.0; problem.dim()]);
    let r = solve(
        &problem,
        &x0,
        &SolverConfig::default().with_strategy(ExpansionStrategy::projcg()),
    )?;

    // deflection along the middle row
    let side = cells - 1;
    let mid = side / 2;
    let row: Vec<String> = (0..side)
        .step_by((side / 16).max(1))
        .map(|j| format!("{:+.3}", r.x[mid * side + j]))
        .collect();
    println!("middle row: {}", row.join(" "));
    let contact = r.x.iter().filter(|v| **v == height).count();
    println!("contact nodes: {contact} of {}\n", problem.dim());

    let mut spec = SweepSpec::new(
        format!("obstacle-{cells}x{cells}"),
        ProblemSource::Obstacle {
            nx: cells,
            ny: cells,
            load,
            obstacle: height,
        },
        1e-6,
    );
    spec.strategies = ["fixed", "gfgf-optapprox", "gfgf-opt", "projcg"]
        .iter()
        .map(|s| parse_strategy(s))
        .collect::<mprgp::Result<_>>()?;
    spec.alpha_grid = vec![1.0, 1.9, 2.0];
    let outcome = run_sweep(&spec)?;
    print!("{}", emit(&outcome.rows, Format::Markdown)?);
    Ok(())
}
