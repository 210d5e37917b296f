//! Power-iteration norm estimates and what they cost.

use mprgp::bench::generate_obstacle;
use mprgp::linop::{estimate_norm_seeded, DenseOperator, GramOperator, SparseColumns};
use mprgp::LinearOperator;

fn main() -> mprgp::Result<()> {
    let diag = DenseOperator::diagonal(&[1.0, 2.0, 3.0]);
    for tol in [1e-2, 1e-6, 1e-12] {
        let e = estimate_norm_seeded(&diag, 100, tol, 0)?;
        println!("diag(1,2,3), tol {tol:.0e}: {:.12} in {} mults", e.value, e.mults_spent);
    }

    let cells = 64;
    let problem = generate_obstacle(cells, cells, -1.0, f64::NEG_INFINITY)?;
    let h = 1.0 / cells as f64;
    let exact = 2.0 * 4.0 * (std::f64::consts::PI * (cells - 1) as f64 * h / 2.0).sin().powi(2);
    for seed in 0..3 {
        let e = estimate_norm_seeded(problem.operator().as_ref(), 2000, 1e-10, seed)?;
        println!(
            "{cells}x{cells} Laplacian, seed {seed}: {:.8} (exact {exact:.8}) in {} mults",
            e.value, e.mults_spent
        );
    }

    // Gram operator of four labelled samples
    let samples = SparseColumns::from_dense_columns(
        2,
        &[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0], vec![-1.0, 0.5]],
    )?;
    let gram = GramOperator::new(samples, vec![1.0, -1.0, 1.0, -1.0])?;
    let e = estimate_norm_seeded(&gram, 100, 1e-12, 0)?;
    println!("Gram operator: {:.10} in {} mults (counter {})", e.value, e.mults_spent, gram.mults());
    Ok(())
}
