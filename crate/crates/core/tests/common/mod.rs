//! Dense helpers and reference solvers shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use mprgp::linop::DenseOperator;
use mprgp::{BoxQp, LinearOperator};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const INF: f64 = f64::INFINITY;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample(StandardNormal)).collect()
}

/// `R'R / n + shift I` for a Gaussian `R`, symmetrized exactly.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let r = DMatrix::from_row_slice(n, n, &gaussian(rng, n * n));
    let mut a = r.tr_mul(&r) / n as f64;
    for i in 0..n {
        a[(i, i)] += shift;
    }
    (&a + a.transpose()) * 0.5
}

pub fn operator(a: &DMatrix<f64>) -> Arc<DenseOperator> {
    let rows: Vec<Vec<f64>> = (0..a.nrows())
        .map(|i| a.row(i).iter().copied().collect())
        .collect();
    Arc::new(DenseOperator::from_rows(&rows).expect("symmetric matrix"))
}

/// Dense copy of an operator, probed one unit vector at a time.
pub fn dense_matrix(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut a = DMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    for k in 0..n {
        unit[k] = 1.0;
        let col = op.apply(&unit);
        unit[k] = 0.0;
        for i in 0..n {
            a[(i, k)] = col[i];
        }
    }
    a
}

pub fn largest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.max()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Random bounds: each component gets none, a lower, an upper or both.
pub fn random_bounds(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lower = vec![-INF; n];
    let mut upper = vec![INF; n];
    for j in 0..n {
        let lo = rng.gen_range(-1.5..0.5);
        let width = rng.gen_range(0.1..2.0);
        match rng.gen_range(0..4) {
            0 => {}
            1 => lower[j] = lo,
            2 => upper[j] = lo + width,
            _ => {
                lower[j] = lo;
                upper[j] = lo + width;
            }
        }
    }
    (lower, upper)
}

/// A seeded random box QP together with its dense Hessian and a feasible start.
pub struct RandomBoxQp {
    pub qp: BoxQp,
    pub a: DMatrix<f64>,
    pub x0: Vec<f64>,
}

pub fn random_box_qp(seed: u64, n: usize) -> RandomBoxQp {
    let mut r = rng(seed);
    let a = random_spd(&mut r, n, 0.1);
    let b: Vec<f64> = gaussian(&mut r, n).into_iter().map(|v| 3.0 * v).collect();
    let (lower, upper) = random_bounds(&mut r, n);
    let start = gaussian(&mut r, n);
    let qp = BoxQp::new(operator(&a), b, Some(lower), Some(upper)).unwrap();
    let x0 = qp.project(&start);
    RandomBoxQp { qp, a, x0 }
}

/// Where a component sits in a candidate configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Free,
    Lower,
    Upper,
}

/// Dense problem data for the oracles.
pub struct DenseQp<'a> {
    pub a: &'a DMatrix<f64>,
    pub b: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub g: Option<&'a DMatrix<f64>>,
    pub e: &'a [f64],
}

impl<'a> DenseQp<'a> {
    pub fn of(qp: &'a BoxQp, a: &'a DMatrix<f64>) -> Self {
        let (g, e) = match qp.equality() {
            Some(eq) => (Some(&eq.matrix), eq.rhs.as_slice()),
            None => (None, &[][..]),
        };
        Self {
            a,
            b: qp.rhs(),
            lower: qp.lower(),
            upper: qp.upper(),
            g,
            e,
        }
    }

    fn n(&self) -> usize {
        self.b.len()
    }

    fn m(&self) -> usize {
        self.g.map_or(0, |g| g.nrows())
    }

    /// Solves the KKT system with the bound components fixed.
    /// Returns `x` and the equality multipliers, or `None` if singular.
    fn solve_face(&self, slots: &[Slot]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let m = self.m();
        let mut x = vec![0.0; n];
        let free: Vec<usize> = (0..n).filter(|&j| slots[j] == Slot::Free).collect();
        for j in 0..n {
            match slots[j] {
                Slot::Lower => x[j] = self.lower[j],
                Slot::Upper => x[j] = self.upper[j],
                Slot::Free => {}
            }
        }
        let k = free.len();
        let mut kkt = DMatrix::zeros(k + m, k + m);
        let mut rhs = DVector::zeros(k + m);
        for (r, &i) in free.iter().enumerate() {
            rhs[r] = self.b[i];
            for j in 0..n {
                if slots[j] != Slot::Free {
                    rhs[r] -= self.a[(i, j)] * x[j];
                }
            }
            for (c, &j) in free.iter().enumerate() {
                kkt[(r, c)] = self.a[(i, j)];
            }
        }
        if let Some(g) = self.g {
            for row in 0..m {
                rhs[k + row] = self.e[row];
                for j in 0..n {
                    if slots[j] != Slot::Free {
                        rhs[k + row] -= g[(row, j)] * x[j];
                    }
                }
                for (c, &j) in free.iter().enumerate() {
                    kkt[(k + row, c)] = g[(row, j)];
                    kkt[(c, k + row)] = g[(row, j)];
                }
            }
        }
        if k + m == 0 {
            return Some((x, Vec::new()));
        }
        let lu = kkt.lu();
        let sol = lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        for (r, &j) in free.iter().enumerate() {
            x[j] = sol[r];
        }
        let mu = (0..m).map(|row| sol[k + row]).collect();
        Some((x, mu))
    }

    /// Lagrangian gradient `Ax - b + G'mu`.
    pub fn lagrangian_gradient(&self, x: &[f64], mu: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let mut grad = self.a * &xv - DVector::from_column_slice(self.b);
        if let Some(g) = self.g {
            grad += g.transpose() * DVector::from_column_slice(mu);
        }
        grad.iter().copied().collect()
    }

    /// Largest KKT violation of `(x, mu)`.
    pub fn kkt_violation(&self, x: &[f64], mu: &[f64]) -> f64 {
        let grad = self.lagrangian_gradient(x, mu);
        let mut worst: f64 = 0.0;
        for j in 0..self.n() {
            let (l, u) = (self.lower[j], self.upper[j]);
            worst = worst.max(l - x[j]).max(x[j] - u);
            let gj = grad[j];
            let dual = if l == u {
                0.0
            } else if x[j] == l {
                (-gj).max(0.0)
            } else if x[j] == u {
                gj.max(0.0)
            } else {
                gj.abs()
            };
            worst = worst.max(dual);
        }
        if let Some(g) = self.g {
            let r = g * DVector::from_column_slice(x) - DVector::from_column_slice(self.e);
            worst = worst.max(r.amax());
        }
        worst
    }
}

/// Brute force over all `3^n` bound configurations; returns the unique
/// configuration satisfying the KKT conditions within `tol`.
pub fn enumeration_oracle(p: &DenseQp, tol: f64) -> Vec<f64> {
    let n = p.n();
    assert!(n <= 12, "enumeration is exponential in n");
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(n as u32);
    let mut slots = vec![Slot::Free; n];
    'configs: for code in 0..total {
        let mut c = code;
        for slot in slots.iter_mut() {
            *slot = match c % 3 {
                0 => Slot::Free,
                1 => Slot::Lower,
                _ => Slot::Upper,
            };
            c /= 3;
        }
        for j in 0..n {
            let bound = match slots[j] {
                Slot::Lower => p.lower[j],
                Slot::Upper => p.upper[j],
                Slot::Free => 0.0,
            };
            if !bound.is_finite() {
                continue 'configs;
            }
        }
        let Some((x, mu)) = p.solve_face(&slots) else {
            continue;
        };
        let grad = p.lagrangian_gradient(&x, &mu);
        let scale = 1.0 + p.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut violation: f64 = 0.0;
        for j in 0..n {
            violation = violation.max(p.lower[j] - x[j]).max(x[j] - p.upper[j]);
            violation = violation.max(match slots[j] {
                Slot::Lower => -grad[j],
                Slot::Upper => grad[j],
                Slot::Free => 0.0,
            });
        }
        if violation <= tol * scale && best.as_ref().is_none_or(|(v, _)| violation < *v) {
            best = Some((violation, x));
        }
    }
    best.expect("no KKT configuration found").1
}

/// Dense reference for larger problems: ADMM locates the active set, which
/// is then refined by primal-dual active-set swaps until the KKT conditions
/// hold to `tol` with the face solved exactly.
pub fn active_set_oracle(p: &DenseQp, tol: f64) -> Vec<f64> {
    let n = p.n();
    let m = p.m();
    let rho = 1.0;
    let mut sys = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            sys[(i, j)] = p.a[(i, j)];
        }
        sys[(i, i)] += rho;
    }
    if let Some(g) = p.g {
        for r in 0..m {
            for j in 0..n {
                sys[(n + r, j)] = g[(r, j)];
                sys[(j, n + r)] = g[(r, j)];
            }
        }
    }
    let lu = sys.lu();
    let clamp = |v: f64, j: usize| v.max(p.lower[j]).min(p.upper[j]);
    let mut z = vec![0.0; n];
    for j in 0..n {
        z[j] = clamp(0.0, j);
    }
    let mut w = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..20_000 {
        let mut rhs = DVector::zeros(n + m);
        for j in 0..n {
            rhs[j] = p.b[j] + rho * (z[j] - w[j]);
        }
        for r in 0..m {
            rhs[n + r] = p.e[r];
        }
        let sol = lu.solve(&rhs).expect("ADMM system is nonsingular");
        x.copy_from_slice(&sol.as_slice()[..n]);
        for j in 0..n {
            z[j] = clamp(x[j] + w[j], j);
            w[j] += x[j] - z[j];
        }
    }

    // snap near-bound components and refine the face
    let mut slots: Vec<Slot> = (0..n)
        .map(|j| {
            if z[j] - p.lower[j] <= 1e-7 {
                Slot::Lower
            } else if p.upper[j] - z[j] <= 1e-7 {
                Slot::Upper
            } else {
                Slot::Free
            }
        })
        .collect();
    for _ in 0..100 {
        let (x, mu) = p.solve_face(&slots).expect("face system is nonsingular");
        if p.kkt_violation(&x, &mu) <= tol {
            return x;
        }
        let grad = p.lagrangian_gradient(&x, &mu);
        let mut changed = false;
        for j in 0..n {
            let next = match slots[j] {
                Slot::Free if x[j] < p.lower[j] => Slot::Lower,
                Slot::Free if x[j] > p.upper[j] => Slot::Upper,
                Slot::Lower if grad[j] < 0.0 && p.lower[j] < p.upper[j] => Slot::Free,
                Slot::Upper if grad[j] > 0.0 && p.lower[j] < p.upper[j] => Slot::Free,
                s => s,
            };
            changed |= next != slots[j];
            slots[j] = next;
        }
        assert!(changed, "active-set refinement stalled");
    }
    panic!("active-set oracle did not certify a KKT point");
}

/// Active set of `x` as a sorted index list.
pub fn active_indices(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<usize> {
    (0..x.len())
        .filter(|&j| x[j] == lower[j] || x[j] == upper[j])
        .collect()
}

pub fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|i| b.binary_search(i).is_ok())
}

/// Textbook conjugate gradients on the dense matrix, returning every iterate.
pub fn reference_cg(a: &DMatrix<f64>, b: &[f64], x0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let mut x = DVector::from_column_slice(x0);
    let bv = DVector::from_column_slice(b);
    let mut g = a * &x - &bv;
    let mut p = g.clone();
    let mut iterates = Vec::with_capacity(steps);
    for _ in 0..steps {
        let ap = a * &p;
        let pap = p.dot(&ap);
        let gg = g.dot(&g);
        let alpha = gg / pap;
        x -= alpha * &p;
        g -= alpha * &ap;
        let beta = g.dot(&g) / gg;
        p = &g + beta * &p;
        iterates.push(x.iter().copied().collect());
    }
    iterates
}
