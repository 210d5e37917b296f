use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linop::{DenseOperator, GridLaplacian, OperatorRef};
use crate::qp::BoxQp;
use crate::smalbe::rank;

/// Obstacle problem on the unit square split into `nx x ny` cells.
///
/// Unknowns are the `(nx - 1)(ny - 1)` interior nodes, the Hessian is the
/// five-point Laplacian scaled by the cell area, the right-hand side is
/// `load * hx * hy` and every node is bounded below by `obstacle`, which may
/// be `-inf`.
pub fn generate_obstacle(nx: usize, ny: usize, load: f64, obstacle: f64) -> Result<BoxQp> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("need at least 2 cells per direction, got {nx}x{ny}"),
        });
    }
    if !load.is_finite() || obstacle.is_nan() || obstacle == f64::INFINITY {
        return Err(Error::InvalidParameter {
            name: "load/obstacle",
            reason: format!("load {load} must be finite, obstacle {obstacle} below +inf"),
        });
    }
    let (hx, hy) = (1.0 / nx as f64, 1.0 / ny as f64);
    let (ix, iy) = (nx - 1, ny - 1);
    let op: OperatorRef = Arc::new(GridLaplacian::new(ix, iy, hx, hy));
    let n = ix * iy;
    let lower = (obstacle > f64::NEG_INFINITY).then(|| vec![obstacle; n]);
    BoxQp::new(op, vec![load * hx * hy; n], lower, None)
}

/// Half-width of the eq-toy box; the hidden feasible point lies in `(-1, 1)`.
pub const EQ_TOY_BOX: f64 = 1.2;
const EQ_TOY_RETRIES: u64 = 16;

/// Seeded random QP with `m` equality rows.
///
/// `A = R'R / n + I` for a Gaussian `R`, `G` is Gaussian with full row rank,
/// `e = G x_hat` for `x_hat` uniform in `(-1, 1)^n`, `b` is Gaussian with
/// standard deviation 2 and the box is `[-1.2, 1.2]^n`. A rank-deficient `G`
/// is redrawn from the next seed.
pub fn generate_eq_toy(n: usize, m: usize, seed: u64) -> Result<BoxQp> {
    if n == 0 || m >= n {
        return Err(Error::InvalidParameter {
            name: "n/m",
            reason: format!("need 0 <= m < n, got n = {n}, m = {m}"),
        });
    }
    for attempt in 0..EQ_TOY_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut normal = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.sample(StandardNormal)).collect() };
        let r = DMatrix::from_row_slice(n, n, &normal(n * n));
        let g = DMatrix::from_row_slice(m, n, &normal(m * n));
        let b: Vec<f64> = normal(n).into_iter().map(|v| 2.0 * v).collect();
        let x_hat: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if m > 0 && rank(&g) < m {
            continue;
        }
        let mut a = r.tr_mul(&r) / n as f64;
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        // symmetrize exactly; tr_mul is symmetric only up to rounding
        let a = (&a + a.transpose()) * 0.5;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).iter().copied().collect()).collect();
        let op: OperatorRef = Arc::new(DenseOperator::from_rows(&rows)?);
        let qp = BoxQp::new(
            op,
            b,
            Some(vec![-EQ_TOY_BOX; n]),
            Some(vec![EQ_TOY_BOX; n]),
        )?;
        if m == 0 {
            return Ok(qp);
        }
        let e: Vec<f64> = (&g * nalgebra::DVector::from_vec(x_hat)).iter().copied().collect();
        return qp.with_equality(g, e);
    }
    Err(Error::RankDeficient { rank: 0, rows: m })
}
