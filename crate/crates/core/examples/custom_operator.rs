//! Plug a matrix-free operator into the solver.
//!
//! The Hessian of a 1D membrane is never stored; only its action is coded.

use std::sync::Arc;

use mprgp::linop::{estimate_norm, MultCounter};
use mprgp::mprgp::ExpansionStrategy;
use mprgp::{solve, BoxQp, LinearOperator, SolverConfig};

/// `tridiag(-1, 2, -1) / h^2` with Dirichlet ends.
#[derive(Debug)]
struct Membrane {
    n: usize,
    inv_h2: f64,
    counter: MultCounter,
}

impl LinearOperator for Membrane {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.counter.bump();
        for i in 0..self.n {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < self.n { x[i + 1] } else { 0.0 };
            y[i] = (2.0 * x[i] - left - right) * self.inv_h2;
        }
    }

    fn mults(&self) -> u64 {
        self.counter.get()
    }
}

fn main() -> mprgp::Result<()> {
    let n = 199;
    let h = 1.0 / (n + 1) as f64;
    let op = Arc::new(Membrane {
        n,
        inv_h2: 1.0 / (h * h),
        counter: MultCounter::default(),
    });

    // downward load, floor at -0.05
    let problem = BoxQp::new(op.clone(), vec![-1.0; n], Some(vec![-0.05; n]), None)?;
    let norm = estimate_norm(op.as_ref(), 1000, 1e-10)?;
    println!(
        "||A|| ~ {:.1} (exact {:.1}) after {} applications",
        norm.value,
        4.0 / (h * h) * (std::f64::consts::PI * n as f64 * h / 2.0).sin().powi(2),
        norm.mults_spent
    );

    let config = SolverConfig::default()
        .with_strategy(ExpansionStrategy::fixed(1.9))
        .with_norm(norm.value)
        .with_rtol(1e-8);
    let r = solve(&problem, &vec![0.0; n], &config)?;
    let contact = r.x.iter().filter(|v| **v == -0.05).count();
    println!(
        "{}: {} applications, {contact} of {n} nodes on the floor",
        config.strategy.name(),
        r.hessian_mults
    );
    println!("operator counter reads {}", op.mults());
    Ok(())
}
